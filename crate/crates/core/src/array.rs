//! 64x64 gain-cell sub-array: row writes, nondestructive reads, refresh and
//! the two-phase stateful logic pulse.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::charge::{residual_after_discharge, sense, CellParams, CellState, ModelConfig, Ns};
use crate::error::{Error, Result};
use crate::ledger::{EventLedger, LedgerEntry, OpKind};
use crate::scalar::Scalar;

pub const DEFAULT_ROWS: usize = 64;
pub const DEFAULT_COLS: usize = 64;

/// Pulse widths and per-column energies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingEnergyConfig<S> {
    pub t_write_ns: Ns,
    pub t_read_ns: Ns,
    pub t_logic_ns: Ns,
    /// Output precharge through the WBL.
    pub t_init_ns: Ns,
    /// Input RWLs asserted, WBL driver gated.
    pub t_eval_ns: Ns,
    pub e_write_fj: S,
    pub e_read_fj: S,
    pub e_not_fj: S,
    pub e_nor_fj: S,
    pub e_dual_sense_fj: S,
}

impl<S: Scalar> TimingEnergyConfig<S> {
    pub fn nominal() -> Self {
        TimingEnergyConfig {
            t_write_ns: 1,
            t_read_ns: 3,
            t_logic_ns: 3,
            t_init_ns: 1,
            t_eval_ns: 2,
            e_write_fj: S::of(5.7),
            e_read_fj: S::of(13.3),
            e_not_fj: S::of(13.4),
            e_nor_fj: S::of(13.5),
            e_dual_sense_fj: S::of(13.34),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_init_ns + self.t_eval_ns != self.t_logic_ns {
            return Err(Error::Config(format!(
                "t_init_ns + t_eval_ns ({} + {}) must equal t_logic_ns ({})",
                self.t_init_ns, self.t_eval_ns, self.t_logic_ns
            )));
        }
        let times = [self.t_write_ns, self.t_read_ns, self.t_init_ns, self.t_eval_ns];
        let energies = [
            self.e_write_fj,
            self.e_read_fj,
            self.e_not_fj,
            self.e_nor_fj,
            self.e_dual_sense_fj,
        ];
        if times.contains(&0) || energies.iter().any(|&e| !(e > S::zero())) {
            return Err(Error::Config("timing and energy constants must be positive".into()));
        }
        Ok(())
    }

    pub fn t_refresh_ns(&self) -> Ns {
        self.t_read_ns + self.t_write_ns
    }

    pub fn duration(&self, kind: OpKind) -> Ns {
        match kind {
            OpKind::Write => self.t_write_ns,
            OpKind::Read => self.t_read_ns,
            OpKind::Refresh => self.t_refresh_ns(),
            OpKind::Not | OpKind::Nor => self.t_logic_ns,
        }
    }

    /// Energy of one operation on one column.
    pub fn energy_per_column(&self, kind: OpKind) -> S {
        match kind {
            OpKind::Write => self.e_write_fj,
            OpKind::Read => self.e_read_fj,
            OpKind::Refresh => self.e_read_fj + self.e_write_fj,
            OpKind::Not => self.e_not_fj,
            OpKind::Nor => self.e_nor_fj,
        }
    }

    /// Read every operand, compute outside the array, write the result back.
    pub fn conventional_flow_fj(&self, n_inputs: usize) -> S {
        S::ns(n_inputs as u64) * self.e_read_fj + self.e_write_fj
    }

    /// Two-row sense whose SA output is taken as the result, plus write-back.
    pub fn sensing_logic_fj(&self) -> S {
        self.e_dual_sense_fj + self.e_write_fj
    }
}

impl<S: Scalar> Default for TimingEnergyConfig<S> {
    fn default() -> Self {
        Self::nominal()
    }
}

/// Sub-array instruction set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum MicroOp {
    Write { row: usize, bits: Vec<bool> },
    Read { row: usize },
    Refresh { row: usize },
    /// One input row is a NOT, two or more a NOR.
    Logic { in_rows: Vec<usize>, out_row: usize },
}

impl MicroOp {
    pub fn kind(&self) -> OpKind {
        match self {
            MicroOp::Write { .. } => OpKind::Write,
            MicroOp::Read { .. } => OpKind::Read,
            MicroOp::Refresh { .. } => OpKind::Refresh,
            MicroOp::Logic { in_rows, .. } if in_rows.len() == 1 => OpKind::Not,
            MicroOp::Logic { .. } => OpKind::Nor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample<S> {
    pub time_ns: Ns,
    pub signal: String,
    pub value: S,
}

pub const TRACE_CSV_HEADER: &str = "time_ns,signal_name,value";

pub fn trace_to_csv<S: Scalar>(samples: &[TraceSample<S>]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.time_ns, s.signal, s.value));
    }
    out
}

#[derive(Debug, Clone)]
struct Tracer<S> {
    columns: Vec<usize>,
    samples: Vec<TraceSample<S>>,
}

impl<S: Scalar> Tracer<S> {
    fn line(&mut self, t: Ns, name: String, value: S) {
        self.samples.push(TraceSample {
            time_ns: t,
            signal: name,
            value,
        });
    }
}

#[derive(Debug, Clone)]
pub struct SubArray<S> {
    rows: usize,
    cols: usize,
    cells: Vec<CellState<S>>,
    params: Vec<CellParams<S>>,
    sa_threshold: Vec<S>,
    model: ModelConfig<S>,
    timing: TimingEnergyConfig<S>,
    ledger: EventLedger<S>,
    busy_until: Ns,
    tracer: Option<Tracer<S>>,
}

impl<S: Scalar> SubArray<S> {
    pub fn new(model: ModelConfig<S>, timing: TimingEnergyConfig<S>) -> Result<Self> {
        Self::with_dims(DEFAULT_ROWS, DEFAULT_COLS, model, timing)
    }

    pub fn with_dims(
        rows: usize,
        cols: usize,
        model: ModelConfig<S>,
        timing: TimingEnergyConfig<S>,
    ) -> Result<Self> {
        model.validate()?;
        timing.validate()?;
        if rows == 0 || cols == 0 {
            return Err(Error::Config("sub-array dimensions must be positive".into()));
        }
        Ok(SubArray {
            rows,
            cols,
            cells: vec![CellState::empty(); rows * cols],
            params: vec![CellParams::nominal(); rows * cols],
            sa_threshold: vec![model.v_sa_read; cols],
            model,
            timing,
            ledger: EventLedger::new(),
            busy_until: 0,
            tracer: None,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn model(&self) -> &ModelConfig<S> {
        &self.model
    }

    pub fn timing(&self) -> &TimingEnergyConfig<S> {
        &self.timing
    }

    pub fn ledger(&self) -> &EventLedger<S> {
        &self.ledger
    }

    /// End of the last issued operation.
    pub fn busy_until(&self) -> Ns {
        self.busy_until
    }

    /// Installs sampled variation: row-major cell parameters and one SA
    /// threshold per column.
    pub fn set_variation(&mut self, params: Vec<CellParams<S>>, sa_threshold: Vec<S>) -> Result<()> {
        if params.len() != self.rows * self.cols || sa_threshold.len() != self.cols {
            return Err(Error::Usage(format!(
                "variation grid must be {}x{} with {} thresholds",
                self.rows, self.cols, self.cols
            )));
        }
        if params.iter().any(|p| !(p.tau_scale > S::zero())) {
            return Err(Error::Usage("tau_scale must be positive".into()));
        }
        self.params = params;
        self.sa_threshold = sa_threshold;
        Ok(())
    }

    pub fn cell_params(&self, row: usize, col: usize) -> &CellParams<S> {
        &self.params[row * self.cols + col]
    }

    pub fn sa_threshold(&self, col: usize) -> S {
        self.sa_threshold[col]
    }

    pub fn cell(&self, row: usize, col: usize) -> &CellState<S> {
        &self.cells[row * self.cols + col]
    }

    /// Storage-node voltage at `t` (not before the cell's last update).
    pub fn voltage(&self, row: usize, col: usize, t: Ns) -> S {
        let i = row * self.cols + col;
        self.cells[i].voltage_at(t.max(self.cells[i].last_update), &self.params[i], &self.model)
    }

    /// Starts recording waveform samples for the given columns.
    pub fn enable_trace(&mut self, columns: Vec<usize>) -> Result<()> {
        if let Some(&c) = columns.iter().find(|&&c| c >= self.cols) {
            return Err(Error::Usage(format!("trace column {c} out of range")));
        }
        self.tracer = Some(Tracer {
            columns,
            samples: Vec::new(),
        });
        Ok(())
    }

    /// Samples with `time_ns` inside `window`.
    pub fn dump_trace(&self, window: Range<Ns>) -> Vec<TraceSample<S>> {
        match &self.tracer {
            Some(t) => t
                .samples
                .iter()
                .filter(|s| window.contains(&s.time_ns))
                .cloned()
                .collect(),
            None => Vec::new(),
        }
    }

    fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.rows {
            Err(Error::RowOutOfRange { row, rows: self.rows })
        } else {
            Ok(())
        }
    }

    fn begin(&self, t_now: Ns) -> Result<()> {
        if t_now < self.busy_until {
            Err(Error::Overlap {
                t_now,
                busy_until: self.busy_until,
            })
        } else {
            Ok(())
        }
    }

    fn record(&mut self, t_now: Ns, kind: OpKind, rows: Vec<usize>) -> Result<()> {
        let duration_ns = self.timing.duration(kind);
        let energy_fj = self.timing.energy_per_column(kind) * S::ns(self.cols as u64);
        self.ledger.push(LedgerEntry {
            start_ns: t_now,
            duration_ns,
            op: kind,
            rows,
            active_columns: self.cols,
            energy_fj,
        })?;
        self.busy_until = t_now + duration_ns;
        Ok(())
    }

    fn trace_row(&mut self, t: Ns, row: usize) {
        if let Some(mut tr) = self.tracer.take() {
            for k in 0..tr.columns.len() {
                let c = tr.columns[k];
                let v = self.voltage(row, c, t);
                tr.line(t, format!("SN[{row}][{c}]"), v);
            }
            self.tracer = Some(tr);
        }
    }

    fn trace_line(&mut self, t: Ns, name: impl FnOnce() -> String, value: S) {
        if let Some(tr) = self.tracer.as_mut() {
            tr.line(t, name(), value);
        }
    }

    fn store_row(&mut self, row: usize, bits: &[bool], t_done: Ns) {
        let vdd = self.model.vdd;
        for (c, &b) in bits.iter().enumerate() {
            self.cells[row * self.cols + c].set(if b { vdd } else { S::zero() }, t_done);
        }
    }

    fn sense_row(&mut self, row: usize, t: Ns) -> Vec<bool> {
        (0..self.cols)
            .map(|c| {
                let i = row * self.cols + c;
                self.cells[i].advance(t, &self.params[i], &self.model);
                sense(self.cells[i].voltage, self.sa_threshold[c])
            })
            .collect()
    }

    pub fn write_row(&mut self, row: usize, bits: &[bool], t_now: Ns) -> Result<()> {
        self.check_row(row)?;
        self.begin(t_now)?;
        if bits.len() != self.cols {
            return Err(Error::WidthMismatch {
                expected: self.cols,
                got: bits.len(),
            });
        }
        let done = t_now + self.timing.t_write_ns;
        let vdd = self.model.vdd;
        self.trace_line(t_now, || format!("WWL[{row}]"), vdd);
        self.trace_row(t_now, row);
        self.store_row(row, bits, done);
        self.trace_row(done, row);
        self.trace_line(done, || format!("WWL[{row}]"), S::zero());
        self.record(t_now, OpKind::Write, vec![row])
    }

    /// Senses the row at `t_now`. Charge is only advanced by decay.
    pub fn read_row(&mut self, row: usize, t_now: Ns) -> Result<Vec<bool>> {
        self.check_row(row)?;
        self.begin(t_now)?;
        let bits = self.sense_row(row, t_now);
        self.trace_read(row, t_now, &bits);
        self.record(t_now, OpKind::Read, vec![row])?;
        Ok(bits)
    }

    fn trace_read(&mut self, row: usize, t_now: Ns, bits: &[bool]) {
        if self.tracer.is_none() {
            return;
        }
        let vdd = self.model.vdd;
        let end = t_now + self.timing.t_read_ns;
        self.trace_line(t_now, || format!("RWL[{row}]"), vdd);
        self.trace_row(t_now, row);
        let cols = self.tracer.as_ref().map(|t| t.columns.clone()).unwrap_or_default();
        for c in cols {
            let v = if bits[c] { S::one() } else { S::zero() };
            self.trace_line(end, || format!("DOUT[{c}]"), v);
        }
        self.trace_line(end, || format!("RWL[{row}]"), S::zero());
    }

    /// Read followed by a write-back of the sensed bits.
    pub fn refresh_row(&mut self, row: usize, t_now: Ns) -> Result<Vec<bool>> {
        self.check_row(row)?;
        self.begin(t_now)?;
        let bits = self.sense_row(row, t_now);
        self.trace_read(row, t_now, &bits);
        let done = t_now + self.timing.t_refresh_ns();
        self.store_row(row, &bits, done);
        self.trace_row(done, row);
        self.record(t_now, OpKind::Refresh, vec![row])?;
        Ok(bits)
    }

    /// Refreshes every row back to back; returns the end time.
    pub fn refresh_all(&mut self, t_now: Ns) -> Result<Ns> {
        let mut t = t_now;
        for row in 0..self.rows {
            self.refresh_row(row, t)?;
            t = self.busy_until;
        }
        Ok(t)
    }

    /// Two-phase logic pulse: precharge `out_row` to VDD, then let the
    /// selected input rows conditionally discharge it through the RBL-WBL
    /// switch. Inputs are sampled at the start of the evaluation phase.
    pub fn exec_logic(&mut self, in_rows: &[usize], out_row: usize, t_now: Ns) -> Result<()> {
        if in_rows.is_empty() {
            return Err(Error::Usage("logic op needs at least one input row".into()));
        }
        for &r in in_rows {
            self.check_row(r)?;
        }
        self.check_row(out_row)?;
        if in_rows.contains(&out_row) {
            return Err(Error::InPlaceLogic { row: out_row });
        }
        for (i, r) in in_rows.iter().enumerate() {
            if in_rows[..i].contains(r) {
                return Err(Error::Usage(format!("logic input row {r} repeated")));
            }
        }
        self.begin(t_now)?;

        let vdd = self.model.vdd;
        let t_eval = t_now + self.timing.t_init_ns;
        let t_done = t_now + self.timing.t_logic_ns;

        self.trace_line(t_now, || format!("WWL[{out_row}]"), vdd);
        self.trace_line(t_now, || "LOGIC".to_string(), vdd);
        self.trace_line(t_now, || "WBL_DRV".to_string(), vdd);
        self.trace_row(t_now, out_row);

        for c in 0..self.cols {
            self.cells[out_row * self.cols + c].set(vdd, t_eval);
        }
        for &r in in_rows {
            for c in 0..self.cols {
                let i = r * self.cols + c;
                self.cells[i].advance(t_eval, &self.params[i], &self.model);
            }
        }

        self.trace_row(t_eval, out_row);
        self.trace_line(t_eval, || "WBL_DRV".to_string(), S::zero());
        for &r in in_rows {
            self.trace_line(t_eval, || format!("RWL[{r}]"), vdd);
            self.trace_row(t_eval, r);
        }

        let mut operands = Vec::with_capacity(in_rows.len());
        for c in 0..self.cols {
            operands.clear();
            operands.extend(in_rows.iter().map(|&r| {
                let i = r * self.cols + c;
                (self.cells[i].voltage, self.params[i])
            }));
            let v = residual_after_discharge(&operands, &self.model)?;
            self.cells[out_row * self.cols + c].set(v, t_done);
        }

        self.trace_row(t_done, out_row);
        for &r in in_rows {
            self.trace_line(t_done, || format!("RWL[{r}]"), S::zero());
        }
        self.trace_line(t_done, || format!("WWL[{out_row}]"), S::zero());
        self.trace_line(t_done, || "LOGIC".to_string(), S::zero());

        let kind = if in_rows.len() == 1 { OpKind::Not } else { OpKind::Nor };
        let mut rows = in_rows.to_vec();
        rows.push(out_row);
        self.record(t_now, kind, rows)
    }

    /// Dispatches one micro-op; reads return the sensed bits.
    pub fn execute(&mut self, op: &MicroOp, t_now: Ns) -> Result<Option<Vec<bool>>> {
        match op {
            MicroOp::Write { row, bits } => self.write_row(*row, bits, t_now).map(|_| None),
            MicroOp::Read { row } => self.read_row(*row, t_now).map(Some),
            MicroOp::Refresh { row } => self.refresh_row(*row, t_now).map(|_| None),
            MicroOp::Logic { in_rows, out_row } => {
                self.exec_logic(in_rows, *out_row, t_now).map(|_| None)
            }
        }
    }
}

/// Fraction of time the array is available when a refresh burst of
/// `refresh_ns` recurs every `period_ns`.
pub fn availability(refresh_ns: Ns, period_ns: Ns) -> f64 {
    if period_ns == 0 {
        return 0.0;
    }
    1.0 - refresh_ns as f64 / period_ns as f64
}
