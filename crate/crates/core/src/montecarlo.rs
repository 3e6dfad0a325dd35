//! Monte Carlo variation sampling, gate success-rate campaigns and
//! closed-loop calibration of the variation magnitude.
//!
//! Every trial draws from its own ChaCha stream keyed by `(seed, stream)`, so
//! results do not depend on evaluation order and campaigns at different
//! sigma scales see common random numbers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{SubArray, TimingEnergyConfig};
use crate::charge::{decay, residual_after_discharge, CellParams, ModelConfig, Ns};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const BATCH: usize = 64;

/// Variation magnitudes. `sigma_tau` is the log-space standard deviation of
/// the lognormal `tau_scale` (median 1); the others are in volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationConfig<S> {
    pub sigma_tau: S,
    pub sigma_sa: S,
    pub sigma_drive: S,
    pub seed: u64,
}

impl<S: Scalar> VariationConfig<S> {
    pub fn zero(seed: u64) -> Self {
        VariationConfig {
            sigma_tau: S::zero(),
            sigma_sa: S::zero(),
            sigma_drive: S::zero(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: S| s >= S::zero() && s.is_finite();
        if ok(self.sigma_tau) && ok(self.sigma_sa) && ok(self.sigma_drive) {
            Ok(())
        } else {
            Err(Error::Config("variation sigmas must be finite and non-negative".into()))
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sigma_tau == S::zero() && self.sigma_sa == S::zero() && self.sigma_drive == S::zero()
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws the parameters of one column: `rows` cells top to bottom, then the
/// column's SA threshold.
pub fn sample_column<S: Scalar, R: Rng + ?Sized>(
    var: &VariationConfig<S>,
    model: &ModelConfig<S>,
    rows: usize,
    rng: &mut R,
) -> (Vec<CellParams<S>>, S) {
    let cells = (0..rows)
        .map(|_| {
            let z_tau = S::standard_normal(rng);
            let z_drive = S::standard_normal(rng);
            CellParams {
                tau_scale: (var.sigma_tau * z_tau).exp(),
                drive_offset: var.sigma_drive * z_drive,
            }
        })
        .collect();
    let sa = model.v_sa_read + var.sigma_sa * S::standard_normal(rng);
    (cells, sa)
}

/// Row-major parameter grid plus per-column SA thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationSample<S> {
    pub params: Vec<CellParams<S>>,
    pub sa_threshold: Vec<S>,
}

/// Samples a full `rows x cols` array from stream `stream` of the seed.
pub fn sample_params<S: Scalar>(
    var: &VariationConfig<S>,
    model: &ModelConfig<S>,
    rows: usize,
    cols: usize,
    stream: u64,
) -> VariationSample<S> {
    let mut rng = stream_rng(var.seed, stream);
    let mut params = vec![CellParams::nominal(); rows * cols];
    let mut sa_threshold = Vec::with_capacity(cols);
    for c in 0..cols {
        let (column, sa) = sample_column(var, model, rows, &mut rng);
        for (r, p) in column.into_iter().enumerate() {
            params[r * cols + c] = p;
        }
        sa_threshold.push(sa);
    }
    VariationSample { params, sa_threshold }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Not,
    Nor,
}

impl Gate {
    pub fn eval(self, bits: &[bool]) -> bool {
        !bits.iter().any(|&b| b)
    }

    pub fn check_arity(self, n: usize) -> Result<()> {
        match (self, n) {
            (Gate::Not, 1) => Ok(()),
            (Gate::Nor, n) if n >= 2 => Ok(()),
            _ => Err(Error::Usage(format!("{self:?} gate cannot take {n} inputs"))),
        }
    }

    /// Input combinations of the default arity, in counting order with input
    /// 0 as the least significant bit.
    pub fn combinations(self, arity: usize) -> Vec<Vec<bool>> {
        (0..1usize << arity)
            .map(|k| (0..arity).map(|i| k >> i & 1 == 1).collect())
            .collect()
    }

    pub fn default_arity(self) -> usize {
        match self {
            Gate::Not => 1,
            Gate::Nor => 2,
        }
    }
}

impl std::str::FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "not" => Ok(Gate::Not),
            "nor" => Ok(Gate::Nor),
            other => Err(Error::Usage(format!("unknown gate `{other}`"))),
        }
    }
}

/// Bits as a key string, input 0 first.
pub fn combo_key(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn combo_stream(bits: &[bool], trial: u64) -> u64 {
    let id = bits
        .iter()
        .enumerate()
        .fold(1u64 << bits.len(), |acc, (i, &b)| acc | (b as u64) << i);
    id << 40 | trial
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord<S> {
    pub trial: u64,
    pub passed: bool,
    pub output_voltage: S,
    /// Smallest `tau_scale` among the inputs holding '1'.
    pub min_tau_scale: Option<S>,
    pub sa_threshold: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FailureBreakdown {
    /// A '1' input decays faster than nominal.
    pub decay: usize,
    /// The SN-referred decision level sits below nominal, which is what a
    /// raised RBL trip point of the sense inverter looks like from the cell.
    pub threshold: usize,
    pub both: usize,
    pub other: usize,
}

impl FailureBreakdown {
    pub fn total(&self) -> usize {
        self.decay + self.threshold + self.both + self.other
    }
}

pub fn failure_attribution<S: Scalar>(
    records: &[TrialRecord<S>],
    model: &ModelConfig<S>,
) -> FailureBreakdown {
    let mut out = FailureBreakdown::default();
    for r in records.iter().filter(|r| !r.passed) {
        let fast = r.min_tau_scale.is_some_and(|t| t < S::one());
        let sa = r.sa_threshold < model.v_sa_read;
        match (fast, sa) {
            (true, true) => out.both += 1,
            (true, false) => out.decay += 1,
            (false, true) => out.threshold += 1,
            (false, false) => out.other += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub breakdown: FailureBreakdown,
}

impl ComboResult {
    pub fn from_records<S: Scalar>(records: &[TrialRecord<S>], model: &ModelConfig<S>) -> Self {
        let trials = records.len();
        let successes = records.iter().filter(|r| r.passed).count();
        ComboResult {
            trials,
            successes,
            success_rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            breakdown: failure_attribution(records, model),
        }
    }
}

/// Success statistics keyed by input combination.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SuccessReport {
    pub combos: BTreeMap<String, ComboResult>,
}

impl SuccessReport {
    pub fn worst(&self) -> Option<(&str, &ComboResult)> {
        self.combos
            .iter()
            .min_by(|a, b| a.1.success_rate.total_cmp(&b.1.success_rate))
            .map(|(k, v)| (k.as_str(), v))
    }

    pub fn meets_floor(&self, floor: f64) -> bool {
        self.combos.values().all(|c| c.success_rate >= floor)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("combination,trials,successes,success_rate,decay,threshold,both,other\n");
        for (k, c) in &self.combos {
            let b = &c.breakdown;
            out.push_str(&format!(
                "{k},{},{},{},{},{},{},{}\n",
                c.trials, c.successes, c.success_rate, b.decay, b.threshold, b.both, b.other
            ));
        }
        out
    }
}

/// One column of a gate experiment: parameters of the input cells, the
/// output cell, and the SA threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSample<S> {
    pub inputs: Vec<CellParams<S>>,
    pub output: CellParams<S>,
    pub sa_threshold: S,
}

impl<S: Scalar> ColumnSample<S> {
    pub fn nominal(arity: usize, model: &ModelConfig<S>) -> Self {
        ColumnSample {
            inputs: vec![CellParams::nominal(); arity],
            output: CellParams::nominal(),
            sa_threshold: model.v_sa_read,
        }
    }

    fn draw(var: &VariationConfig<S>, model: &ModelConfig<S>, arity: usize, stream: u64) -> Self {
        let mut rng = stream_rng(var.seed, stream);
        let (mut cells, sa_threshold) = sample_column(var, model, arity + 1, &mut rng);
        let output = cells.pop().expect("arity + 1 cells");
        ColumnSample {
            inputs: cells,
            output,
            sa_threshold,
        }
    }
}

/// Runs one gate on a small sub-array with one column per sample: write the
/// inputs, wait until the oldest input is `input_age_ns` old at evaluation,
/// execute the gate and sense the output. Returns `(sensed bit, output SN
/// voltage)` per column.
pub fn simulate_gate_columns<S: Scalar>(
    gate: Gate,
    input_bits: &[bool],
    input_age_ns: Ns,
    columns: &[ColumnSample<S>],
    model: &ModelConfig<S>,
    timing: &TimingEnergyConfig<S>,
) -> Result<Vec<(bool, S)>> {
    gate.check_arity(input_bits.len())?;
    let arity = input_bits.len();
    let cols = columns.len();
    let mut array = SubArray::with_dims(arity + 1, cols, *model, *timing)?;
    let mut params = vec![CellParams::nominal(); (arity + 1) * cols];
    for (c, col) in columns.iter().enumerate() {
        if col.inputs.len() != arity {
            return Err(Error::Usage("column sample arity mismatch".into()));
        }
        for (r, p) in col.inputs.iter().enumerate() {
            params[r * cols + c] = *p;
        }
        params[arity * cols + c] = col.output;
    }
    array.set_variation(params, columns.iter().map(|c| c.sa_threshold).collect())?;

    let mut t = 0;
    for (r, &b) in input_bits.iter().enumerate() {
        array.write_row(r, &vec![b; cols], t)?;
        t = array.busy_until();
    }
    let first_written = timing.t_write_ns;
    let t_logic = (first_written + input_age_ns)
        .saturating_sub(timing.t_init_ns)
        .max(t);
    let in_rows: Vec<usize> = (0..arity).collect();
    array.exec_logic(&in_rows, arity, t_logic)?;
    let t_read = array.busy_until();
    let voltages: Vec<S> = (0..cols).map(|c| array.voltage(arity, c, t_read)).collect();
    let bits = array.read_row(arity, t_read)?;
    Ok(bits.into_iter().zip(voltages).collect())
}

/// Monte Carlo trials of one input combination.
pub fn gate_trial_records<S: Scalar>(
    gate: Gate,
    input_bits: &[bool],
    n_trials: usize,
    input_age_ns: Ns,
    var: &VariationConfig<S>,
    model: &ModelConfig<S>,
    timing: &TimingEnergyConfig<S>,
) -> Result<Vec<TrialRecord<S>>> {
    gate.check_arity(input_bits.len())?;
    if n_trials == 0 {
        return Err(Error::Usage("at least one trial is required".into()));
    }
    var.validate()?;
    let expected = gate.eval(input_bits);
    let arity = input_bits.len();
    let batches: Vec<Vec<TrialRecord<S>>> = (0..n_trials.div_ceil(BATCH))
        .into_par_iter()
        .map(|b| {
            let lo = b * BATCH;
            let hi = (lo + BATCH).min(n_trials);
            let samples: Vec<ColumnSample<S>> = (lo..hi)
                .map(|i| ColumnSample::draw(var, model, arity, combo_stream(input_bits, i as u64)))
                .collect();
            let outs =
                simulate_gate_columns(gate, input_bits, input_age_ns, &samples, model, timing)?;
            Ok(samples
                .iter()
                .zip(outs)
                .enumerate()
                .map(|(j, (s, (bit, v)))| TrialRecord {
                    trial: (lo + j) as u64,
                    passed: bit == expected,
                    output_voltage: v,
                    min_tau_scale: s
                        .inputs
                        .iter()
                        .zip(input_bits)
                        .filter(|(_, &b)| b)
                        .map(|(p, _)| p.tau_scale)
                        .reduce(S::min),
                    sa_threshold: s.sa_threshold,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(batches.into_iter().flatten().collect())
}

pub fn run_gate_trials<S: Scalar>(
    gate: Gate,
    input_bits: &[bool],
    n_trials: usize,
    input_age_ns: Ns,
    var: &VariationConfig<S>,
    model: &ModelConfig<S>,
    timing: &TimingEnergyConfig<S>,
) -> Result<ComboResult> {
    let records = gate_trial_records(gate, input_bits, n_trials, input_age_ns, var, model, timing)?;
    Ok(ComboResult::from_records(&records, model))
}

/// Every input combination of `gate` at its default arity.
pub fn run_gate_campaign<S: Scalar>(
    gate: Gate,
    n_trials: usize,
    input_age_ns: Ns,
    var: &VariationConfig<S>,
    model: &ModelConfig<S>,
    timing: &TimingEnergyConfig<S>,
) -> Result<SuccessReport> {
    let mut report = SuccessReport::default();
    for bits in gate.combinations(gate.default_arity()) {
        let r = run_gate_trials(gate, &bits, n_trials, input_age_ns, var, model, timing)?;
        report.combos.insert(combo_key(&bits), r);
    }
    Ok(report)
}

/// The single-'1' cases: NOT('1') and both one-hot NOR pairs.
pub fn single_one_cases() -> Vec<(Gate, Vec<bool>)> {
    vec![
        (Gate::Not, vec![true]),
        (Gate::Nor, vec![true, false]),
        (Gate::Nor, vec![false, true]),
    ]
}

/// Lowest success rate over the single-'1' cases.
pub fn worst_case_single_one<S: Scalar>(
    n_trials: usize,
    input_age_ns: Ns,
    var: &VariationConfig<S>,
    model: &ModelConfig<S>,
    timing: &TimingEnergyConfig<S>,
) -> Result<f64> {
    let mut worst = 1.0f64;
    for (gate, bits) in single_one_cases() {
        let r = run_gate_trials(gate, &bits, n_trials, input_age_ns, var, model, timing)?;
        worst = worst.min(r.success_rate);
    }
    Ok(worst)
}

/// Relative sigma weights: one volt of SA spread per unit scale, and drive
/// and decay spreads sized so each moves the aged NOT('1') output level by
/// the same amount per unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaRatios<S> {
    pub tau_per_scale: S,
    pub sa_per_scale: S,
    pub drive_per_scale: S,
}

impl<S: Scalar> SigmaRatios<S> {
    pub fn balanced(model: &ModelConfig<S>) -> Self {
        let age = model.drt_logic_ns;
        let residual = |p: CellParams<S>| {
            let v = decay(model.vdd, age, &p, model);
            residual_after_discharge(&[(v, p)], model).expect("one input")
        };
        let h = S::of(1e-4);
        let nominal = CellParams::nominal();
        let d_drive = (residual(CellParams {
            drive_offset: h,
            ..nominal
        }) - residual(CellParams {
            drive_offset: -h,
            ..nominal
        }))
        .abs()
            / (h + h);
        let d_tau = (residual(CellParams {
            tau_scale: h.exp(),
            ..nominal
        }) - residual(CellParams {
            tau_scale: (-h).exp(),
            ..nominal
        }))
        .abs()
            / (h + h);
        let inv = |d: S| if d > S::zero() { S::one() / d } else { S::zero() };
        SigmaRatios {
            tau_per_scale: inv(d_tau),
            sa_per_scale: S::one(),
            drive_per_scale: inv(d_drive),
        }
    }

    pub fn at(&self, scale: S, seed: u64) -> VariationConfig<S> {
        VariationConfig {
            sigma_tau: self.tau_per_scale * scale,
            sigma_sa: self.sa_per_scale * scale,
            sigma_drive: self.drive_per_scale * scale,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions<S> {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// Early-exit band around the target.
    pub fine_tolerance: f64,
    pub min_scale: S,
    pub max_steps: usize,
    pub ratios: Option<SigmaRatios<S>>,
}

impl<S: Scalar> Default for CalibrationOptions<S> {
    fn default() -> Self {
        CalibrationOptions {
            trials: 20_000,
            seed: 0x6763_7069_6d00_0001,
            tolerance: 0.003,
            fine_tolerance: 0.0005,
            min_scale: S::zero(),
            max_steps: 40,
            ratios: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration<S> {
    pub variation: VariationConfig<S>,
    pub scale: S,
    pub worst_case: f64,
    pub trace: Vec<String>,
}

/// Finds the common sigma scale at which the worst single-'1' success rate at
/// `drt_logic_ns` meets `target` (bisection, common random numbers).
pub fn calibrate_variation<S: Scalar>(
    target: f64,
    model: &ModelConfig<S>,
    timing: &TimingEnergyConfig<S>,
    opts: &CalibrationOptions<S>,
) -> Result<Calibration<S>> {
    if !(target > 0.5 && target <= 1.0) {
        return Err(Error::Usage(format!("calibration target {target} outside (0.5, 1]")));
    }
    model.validate()?;
    let ratios = opts.ratios.unwrap_or_else(|| SigmaRatios::balanced(model));
    let age = model.drt_logic_ns;
    let mut trace = Vec::new();
    let eval = |scale: S, trace: &mut Vec<String>| -> Result<f64> {
        let var = ratios.at(scale, opts.seed);
        let w = worst_case_single_one(opts.trials, age, &var, model, timing)?;
        trace.push(format!(
            "scale={scale:.6} sigma_tau={:.6} sigma_sa={:.6} sigma_drive={:.6} worst={w:.5}",
            var.sigma_tau, var.sigma_sa, var.sigma_drive
        ));
        Ok(w)
    };
    let done = |scale: S, w: f64, trace: Vec<String>| Calibration {
        variation: ratios.at(scale, opts.seed),
        scale,
        worst_case: w,
        trace,
    };

    let mut lo = opts.min_scale.max(S::zero());
    let w_lo = eval(lo, &mut trace)?;
    if w_lo < target {
        if target - w_lo <= opts.tolerance {
            return Ok(done(lo, w_lo, trace));
        }
        return Err(Error::Calibration {
            msg: format!(
                "worst case {w_lo:.5} at the minimum scale {lo} is already below target {target}"
            ),
            trace,
        });
    }
    if w_lo - target <= opts.fine_tolerance {
        return Ok(done(lo, w_lo, trace));
    }

    let mut hi = if lo > S::zero() { lo + lo } else { S::of(0.01) };
    let mut w_hi = eval(hi, &mut trace)?;
    let mut doublings = 0;
    while w_hi >= target {
        if w_hi - target <= opts.fine_tolerance {
            return Ok(done(hi, w_hi, trace));
        }
        lo = hi;
        hi = hi + hi;
        w_hi = eval(hi, &mut trace)?;
        doublings += 1;
        if doublings > 30 {
            return Err(Error::Calibration {
                msg: "could not bracket the target from above".into(),
                trace,
            });
        }
    }
    let mut w_lo = w_lo;
    for _ in 0..opts.max_steps {
        let mid = (lo + hi) * S::of(0.5);
        let w = eval(mid, &mut trace)?;
        if (w - target).abs() <= opts.fine_tolerance {
            return Ok(done(mid, w, trace));
        }
        if w >= target {
            lo = mid;
            w_lo = w;
        } else {
            hi = mid;
            w_hi = w;
        }
    }
    let (best, w) = if (w_lo - target).abs() <= (w_hi - target).abs() {
        (lo, w_lo)
    } else {
        (hi, w_hi)
    };
    if (w - target).abs() <= opts.tolerance {
        Ok(done(best, w, trace))
    } else {
        Err(Error::Calibration {
            msg: format!("no scale within {} of target {target}; closest {w:.5}", opts.tolerance),
            trace,
        })
    }
}
