//! Micro-op programs: emission, timing, refresh insertion and audits.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::alloc::{RowAssignment, RowBudget};
use super::netlist::{Node, NodeId, NorNetlist};
use crate::array::{MicroOp, TimingEnergyConfig, DEFAULT_COLS};
use crate::charge::Ns;
use crate::error::{Error, Result};
use crate::ledger::OpKind;
use crate::scalar::Scalar;

pub const PROGRAM_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    /// Writes input `k` of the current vector set.
    WriteInput { row: usize, input: usize },
    WriteConst { row: usize, value: bool },
    Logic { in_rows: Vec<usize>, out_row: usize, node: NodeId },
    Refresh { row: usize },
    /// Senses output `k`.
    ReadOutput { row: usize, output: usize },
}

impl Step {
    pub fn kind(&self) -> OpKind {
        match self {
            Step::WriteInput { .. } | Step::WriteConst { .. } => OpKind::Write,
            Step::Logic { in_rows, .. } if in_rows.len() == 1 => OpKind::Not,
            Step::Logic { .. } => OpKind::Nor,
            Step::Refresh { .. } => OpKind::Refresh,
            Step::ReadOutput { .. } => OpKind::Read,
        }
    }

    /// Rows whose current value this step senses.
    pub fn consumes(&self) -> &[usize] {
        match self {
            Step::Logic { in_rows, .. } => in_rows,
            Step::Refresh { row } | Step::ReadOutput { row, .. } => std::slice::from_ref(row),
            _ => &[],
        }
    }

    /// Row whose value this step (re)defines.
    pub fn defines(&self) -> Option<usize> {
        match self {
            Step::WriteInput { row, .. } | Step::WriteConst { row, .. } | Step::Refresh { row } => {
                Some(*row)
            }
            Step::Logic { out_row, .. } => Some(*out_row),
            Step::ReadOutput { .. } => None,
        }
    }

    /// Offset from op start at which inputs are sampled.
    pub fn sample_offset<S: Scalar>(&self, timing: &TimingEnergyConfig<S>) -> Ns {
        match self {
            Step::Logic { .. } => timing.t_init_ns,
            _ => 0,
        }
    }

    pub fn to_micro_op(&self, input_bits: &[Vec<bool>], cols: usize) -> MicroOp {
        match self {
            Step::WriteInput { row, input } => MicroOp::Write {
                row: *row,
                bits: (0..cols)
                    .map(|c| input_bits.get(c).is_some_and(|v| v[*input]))
                    .collect(),
            },
            Step::WriteConst { row, value } => MicroOp::Write {
                row: *row,
                bits: vec![*value; cols],
            },
            Step::Logic { in_rows, out_row, .. } => MicroOp::Logic {
                in_rows: in_rows.clone(),
                out_row: *out_row,
            },
            Step::Refresh { row } => MicroOp::Refresh { row: *row },
            Step::ReadOutput { row, .. } => MicroOp::Read { row: *row },
        }
    }
}

/// Flat JSON form of a step: `{op, rows, t_start_ns, ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpRecord {
    pub op: OpKind,
    /// Logic ops list inputs first and the output last.
    pub rows: Vec<usize>,
    pub t_start_ns: Ns,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "OpRecord", try_from = "OpRecord")]
pub struct ProgramOp {
    pub t_start_ns: Ns,
    pub step: Step,
}

impl From<ProgramOp> for OpRecord {
    fn from(p: ProgramOp) -> Self {
        let mut r = OpRecord {
            op: p.step.kind(),
            rows: Vec::new(),
            t_start_ns: p.t_start_ns,
            input: None,
            value: None,
            node: None,
            output: None,
        };
        match p.step {
            Step::WriteInput { row, input } => {
                r.rows = vec![row];
                r.input = Some(input);
            }
            Step::WriteConst { row, value } => {
                r.rows = vec![row];
                r.value = Some(value);
            }
            Step::Logic { mut in_rows, out_row, node } => {
                in_rows.push(out_row);
                r.rows = in_rows;
                r.node = Some(node);
            }
            Step::Refresh { row } => r.rows = vec![row],
            Step::ReadOutput { row, output } => {
                r.rows = vec![row];
                r.output = Some(output);
            }
        }
        r
    }
}

impl TryFrom<OpRecord> for ProgramOp {
    type Error = Error;

    fn try_from(r: OpRecord) -> Result<Self> {
        let bad = |m: &str| Error::Program(format!("op at {} ns: {m}", r.t_start_ns));
        let single = || match r.rows.as_slice() {
            [row] => Ok(*row),
            _ => Err(bad("expected exactly one row")),
        };
        let step = match r.op {
            OpKind::Write => match (r.input, r.value) {
                (Some(input), None) => Step::WriteInput { row: single()?, input },
                (None, Some(value)) => Step::WriteConst { row: single()?, value },
                _ => return Err(bad("write needs exactly one of `input` or `value`")),
            },
            OpKind::Read => Step::ReadOutput {
                row: single()?,
                output: r.output.ok_or_else(|| bad("read needs `output`"))?,
            },
            OpKind::Refresh => Step::Refresh { row: single()? },
            OpKind::Not | OpKind::Nor => {
                let (out_row, in_rows) = r.rows.split_last().ok_or_else(|| bad("no rows"))?;
                let arity_ok = match r.op {
                    OpKind::Not => in_rows.len() == 1,
                    _ => in_rows.len() >= 2,
                };
                if !arity_ok {
                    return Err(bad("row count does not match the gate"));
                }
                Step::Logic {
                    in_rows: in_rows.to_vec(),
                    out_row: *out_row,
                    node: r.node.ok_or_else(|| bad("logic needs `node`"))?,
                }
            }
        };
        Ok(ProgramOp {
            t_start_ns: r.t_start_ns,
            step,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PimProgram {
    pub version: u32,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub input_rows: Vec<usize>,
    pub output_rows: Vec<usize>,
    pub netlist: NorNetlist,
    /// Row of every netlist node.
    pub node_rows: Vec<usize>,
    pub peak_live: usize,
    pub peak_value_rows: usize,
    pub ops: Vec<ProgramOp>,
    pub duration_ns: Ns,
    pub energy_fj: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramStats {
    pub gates: usize,
    pub not_gates: usize,
    pub nor_gates: usize,
    pub writes: usize,
    pub reads: usize,
    pub refreshes: usize,
    pub peak_live: usize,
    pub peak_value_rows: usize,
}

impl PimProgram {
    /// Inputs written first, then the constants it uses, then every gate in
    /// netlist order, then one read per output.
    pub fn emit<S: Scalar>(
        netlist: &NorNetlist,
        rows: &RowAssignment,
        budget: RowBudget,
        timing: &TimingEnergyConfig<S>,
    ) -> Result<Self> {
        let mut steps = Vec::new();
        let input_rows: Vec<usize> = (0..netlist.inputs.len())
            .map(|i| {
                let id = netlist
                    .nodes
                    .iter()
                    .position(|n| *n == Node::Input(i))
                    .expect("inputs are never pruned");
                rows.node_row[id]
            })
            .collect();
        for (i, &row) in input_rows.iter().enumerate() {
            steps.push(Step::WriteInput { row, input: i });
        }
        for value in [false, true] {
            if netlist.nodes.contains(&Node::Const(value)) {
                steps.push(Step::WriteConst {
                    row: budget.const_row(value),
                    value,
                });
            }
        }
        for (id, node) in netlist.nodes.iter().enumerate() {
            if let Node::Nor(ops) = node {
                steps.push(Step::Logic {
                    in_rows: ops.iter().map(|&o| rows.node_row[o]).collect(),
                    out_row: rows.node_row[id],
                    node: id,
                });
            }
        }
        let output_rows: Vec<usize> = netlist.outputs.iter().map(|(_, n)| rows.node_row[*n]).collect();
        for (k, &row) in output_rows.iter().enumerate() {
            steps.push(Step::ReadOutput { row, output: k });
        }
        let mut program = PimProgram {
            version: PROGRAM_VERSION,
            inputs: netlist.inputs.clone(),
            outputs: netlist.outputs.iter().map(|(s, _)| s.clone()).collect(),
            input_rows,
            output_rows,
            netlist: netlist.clone(),
            node_rows: rows.node_row.clone(),
            peak_live: rows.peak_live,
            peak_value_rows: rows.peak_value_rows,
            ops: steps
                .into_iter()
                .map(|step| ProgramOp { t_start_ns: 0, step })
                .collect(),
            duration_ns: 0,
            energy_fj: 0.0,
        };
        program.retime(timing, DEFAULT_COLS);
        Ok(program)
    }

    /// Back-to-back timestamps from the pulse widths, and the cost estimate
    /// for `cols` active columns.
    pub fn retime<S: Scalar>(&mut self, timing: &TimingEnergyConfig<S>, cols: usize) {
        let mut t = 0;
        let mut energy = S::zero();
        for op in &mut self.ops {
            op.t_start_ns = t;
            let kind = op.step.kind();
            t += timing.duration(kind);
            energy = energy + timing.energy_per_column(kind) * S::ns(cols as u64);
        }
        self.duration_ns = t;
        self.energy_fj = energy.to_f64().unwrap_or(f64::NAN);
    }

    pub fn stats(&self) -> ProgramStats {
        let count = |k: OpKind| self.ops.iter().filter(|o| o.step.kind() == k).count();
        let (not_gates, nor_gates) = (count(OpKind::Not), count(OpKind::Nor));
        ProgramStats {
            gates: not_gates + nor_gates,
            not_gates,
            nor_gates,
            writes: count(OpKind::Write),
            reads: count(OpKind::Read),
            refreshes: count(OpKind::Refresh),
            peak_live: self.peak_live,
            peak_value_rows: self.peak_value_rows,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PimProgram = serde_json::from_str(text)
            .map_err(|e| Error::Program(format!("malformed program: {e}")))?;
        if p.version != PROGRAM_VERSION {
            return Err(Error::Program(format!("unsupported program version {}", p.version)));
        }
        p.netlist.validate()?;
        if p.input_rows.len() != p.inputs.len() || p.output_rows.len() != p.outputs.len() {
            return Err(Error::Program("row bindings do not match inputs/outputs".into()));
        }
        Ok(p)
    }

    /// Checks both program invariants and returns every violation found.
    pub fn audit<S: Scalar>(&self, drt_logic_ns: Ns, timing: &TimingEnergyConfig<S>) -> Vec<String> {
        let mut v = audit_rows(self);
        v.extend(audit_refresh(self, drt_logic_ns, timing).into_iter().map(|s| s.to_string()));
        v
    }
}

/// A consumption of a value older than the retention budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaleUse {
    pub op_index: usize,
    pub row: usize,
    pub age_ns: Option<Ns>,
}

impl std::fmt::Display for StaleUse {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.age_ns {
            Some(a) => write!(f, "op {} reads row {} at age {a} ns", self.op_index, self.row),
            None => write!(f, "op {} reads undefined row {}", self.op_index, self.row),
        }
    }
}

/// Replays the recorded timestamps and reports every sensed value whose age
/// exceeds `drt_logic_ns`.
pub fn audit_refresh<S: Scalar>(
    program: &PimProgram,
    drt_logic_ns: Ns,
    timing: &TimingEnergyConfig<S>,
) -> Vec<StaleUse> {
    let mut defined: HashMap<usize, Ns> = HashMap::new();
    let mut stale = Vec::new();
    for (i, op) in program.ops.iter().enumerate() {
        let sample = op.t_start_ns + op.step.sample_offset(timing);
        for &row in op.step.consumes() {
            match defined.get(&row) {
                Some(&d) if sample >= d && sample - d <= drt_logic_ns => {}
                Some(&d) => stale.push(StaleUse {
                    op_index: i,
                    row,
                    age_ns: Some(sample.saturating_sub(d)),
                }),
                None => stale.push(StaleUse {
                    op_index: i,
                    row,
                    age_ns: None,
                }),
            }
        }
        if let Some(row) = op.step.defines() {
            defined.insert(row, op.t_start_ns + timing.duration(op.step.kind()));
        }
    }
    stale
}

/// Replays the program over a symbolic row map and reports every logic op
/// or output read that would see a value other than the one the netlist
/// expects.
pub fn audit_rows(program: &PimProgram) -> Vec<String> {
    #[derive(Clone, Copy, PartialEq, Eq, Debug)]
    enum Content {
        Node(NodeId),
        Const(bool),
    }
    let nl = &program.netlist;
    let expect = |id: NodeId| match nl.nodes[id] {
        Node::Const(b) => Content::Const(b),
        _ => Content::Node(id),
    };
    let input_node: HashMap<usize, NodeId> = nl
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(id, n)| match n {
            Node::Input(i) => Some((*i, id)),
            _ => None,
        })
        .collect();
    let mut rows: HashMap<usize, Content> = HashMap::new();
    let mut errs = Vec::new();
    for (i, op) in program.ops.iter().enumerate() {
        match &op.step {
            Step::WriteInput { row, input } => match input_node.get(input) {
                Some(&n) => {
                    rows.insert(*row, Content::Node(n));
                }
                None => errs.push(format!("op {i}: write of unknown input {input}")),
            },
            Step::WriteConst { row, value } => {
                rows.insert(*row, Content::Const(*value));
            }
            Step::Refresh { .. } => {}
            Step::Logic { in_rows, out_row, node } => {
                let Some(Node::Nor(ops)) = nl.nodes.get(*node) else {
                    errs.push(format!("op {i}: node {node} is not a gate"));
                    continue;
                };
                if ops.len() != in_rows.len() {
                    errs.push(format!("op {i}: arity differs from node {node}"));
                    continue;
                }
                for (&r, &o) in in_rows.iter().zip(ops) {
                    if rows.get(&r) != Some(&expect(o)) {
                        errs.push(format!(
                            "op {i}: row {r} holds {:?}, node {node} needs {:?}",
                            rows.get(&r),
                            expect(o)
                        ));
                    }
                }
                rows.insert(*out_row, Content::Node(*node));
            }
            Step::ReadOutput { row, output } => {
                let Some((_, n)) = nl.outputs.get(*output) else {
                    errs.push(format!("op {i}: read of unknown output {output}"));
                    continue;
                };
                if rows.get(row) != Some(&expect(*n)) {
                    errs.push(format!("op {i}: output {output} row {row} was clobbered"));
                }
            }
        }
    }
    errs
}

/// Inserts refreshes so no sensed value is older than `drt_logic_ns`, each
/// as late as possible: a live row is refreshed only when letting the next
/// op run first would leave no in-budget slot for it afterwards. Existing
/// refreshes are dropped first.
pub fn insert_refresh<S: Scalar>(
    program: &PimProgram,
    drt_logic_ns: Ns,
    timing: &TimingEnergyConfig<S>,
) -> PimProgram {
    let ops: Vec<Step> = program
        .ops
        .iter()
        .filter(|o| !matches!(o.step, Step::Refresh { .. }))
        .map(|o| o.step.clone())
        .collect();

    // per row: indices of the ops that consume its value, in order
    let mut uses: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut defs: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, s) in ops.iter().enumerate() {
        for &r in s.consumes() {
            uses.entry(r).or_default().push(i);
        }
        if let Some(r) = s.defines() {
            defs.entry(r).or_default().push(i);
        }
    }
    // first consumption at or after op i of the value row holds before op i
    let next_use = |row: usize, i: usize| -> Option<usize> {
        let u = uses.get(&row)?;
        let j = *u.get(u.partition_point(|&j| j < i))?;
        if let Some(d) = defs.get(&row) {
            if d.get(d.partition_point(|&x| x < i)).is_some_and(|&di| di < j) {
                return None;
            }
        }
        Some(j)
    };

    let t_refresh = timing.t_refresh_ns();
    let mut out = Vec::with_capacity(ops.len());
    let mut defined: HashMap<usize, Ns> = HashMap::new();
    let mut t: Ns = 0;
    for (i, step) in ops.iter().enumerate() {
        let dur = timing.duration(step.kind());
        let offset = step.sample_offset(timing);
        // (deadline, row, sensed by this op, still needed after it)
        let mut live: Vec<(Ns, usize, bool, bool)> = Vec::new();
        for (&row, &d) in &defined {
            let Some(j) = next_use(row, i) else { continue };
            let now = j == i;
            let later = step.defines() != Some(row) && (!now || next_use(row, i + 1).is_some());
            live.push((d + drt_logic_ns, row, now, later));
        }
        live.sort_unstable();
        // Refresh the shortest earliest-deadline prefix that lets every other
        // row wait: rows sensed now must still be in budget, and the rest
        // must remain refreshable one after another once this op ends.
        let k = (0..=live.len())
            .find(|&k| {
                let s = t + t_refresh * k as Ns;
                let e = s + dur;
                let rest = &live[k..];
                rest.iter().all(|&(d, _, now, _)| !now || s + offset <= d)
                    && rest
                        .iter()
                        .filter(|w| w.3)
                        .enumerate()
                        .all(|(j, &(d, ..))| e + t_refresh * j as Ns <= d)
            })
            .unwrap_or(live.len());
        for &(_, row, ..) in live.iter().take(k) {
            out.push(ProgramOp {
                t_start_ns: t,
                step: Step::Refresh { row },
            });
            t += t_refresh;
            defined.insert(row, t);
        }
        out.push(ProgramOp {
            t_start_ns: t,
            step: step.clone(),
        });
        t += dur;
        if let Some(row) = step.defines() {
            defined.insert(row, t);
        }
    }
    let mut p = PimProgram {
        ops: out,
        ..program.clone()
    };
    p.retime(timing, DEFAULT_COLS);
    p
}
