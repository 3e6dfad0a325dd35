//! Distribution of compiled programs over parallel sub-arrays.

use serde::{Deserialize, Serialize};

use super::program::PimProgram;
use crate::array::TimingEnergyConfig;
use crate::charge::Ns;
use crate::error::{Error, Result};
use crate::ledger::OpKind;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// Each sub-array runs its queue independently.
    #[default]
    Relaxed,
    /// Shared control: in every slot all busy sub-arrays either issue the
    /// same op kind or idle.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemSchedule {
    pub mode: ControlMode,
    /// Program indices per sub-array, in execution order.
    pub assignments: Vec<Vec<usize>>,
    pub finish_ns: Vec<Ns>,
    pub makespan_ns: Ns,
    pub slots: usize,
}

/// Control class of an op: NOT and NOR share the logic pulse.
fn class(kind: OpKind) -> OpKind {
    match kind {
        OpKind::Nor => OpKind::Not,
        k => k,
    }
}

/// Round-robin assignment; programs beyond `n_subarrays` queue behind earlier
/// ones on the same sub-array.
pub fn schedule<S: Scalar>(
    programs: &[PimProgram],
    n_subarrays: usize,
    mode: ControlMode,
    timing: &TimingEnergyConfig<S>,
) -> Result<SystemSchedule> {
    if n_subarrays == 0 {
        return Err(Error::Usage("need at least one sub-array".into()));
    }
    let mut assignments = vec![Vec::new(); n_subarrays];
    for i in 0..programs.len() {
        assignments[i % n_subarrays].push(i);
    }
    let queues: Vec<Vec<OpKind>> = assignments
        .iter()
        .map(|ps| {
            ps.iter()
                .flat_map(|&p| programs[p].ops.iter().map(|o| o.step.kind()))
                .collect()
        })
        .collect();

    let (finish_ns, slots) = match mode {
        ControlMode::Relaxed => {
            let f: Vec<Ns> = queues
                .iter()
                .map(|q| q.iter().map(|&k| timing.duration(k)).sum())
                .collect();
            let slots = queues.iter().map(Vec::len).max().unwrap_or(0);
            (f, slots)
        }
        ControlMode::Strict => lockstep(&queues, timing),
    };
    Ok(SystemSchedule {
        mode,
        makespan_ns: finish_ns.iter().copied().max().unwrap_or(0),
        assignments,
        finish_ns,
        slots,
    })
}

fn lockstep<S: Scalar>(queues: &[Vec<OpKind>], timing: &TimingEnergyConfig<S>) -> (Vec<Ns>, usize) {
    let mut pc = vec![0usize; queues.len()];
    let mut finish = vec![0; queues.len()];
    let mut t = 0;
    let mut slots = 0;
    loop {
        // most popular pending class; ties go to the lowest-numbered sub-array
        let mut best: Option<(usize, OpKind)> = None;
        for (q, &i) in queues.iter().zip(&pc) {
            let Some(&k) = q.get(i) else { continue };
            let c = class(k);
            let votes = queues
                .iter()
                .zip(&pc)
                .filter(|(q2, &i2)| q2.get(i2).is_some_and(|&k2| class(k2) == c))
                .count();
            if best.is_none_or(|(v, _)| votes > v) {
                best = Some((votes, c));
            }
        }
        let Some((_, c)) = best else { break };
        let width = timing.duration(if c == OpKind::Not { OpKind::Nor } else { c });
        for (s, q) in queues.iter().enumerate() {
            if q.get(pc[s]).is_some_and(|&k| class(k) == c) {
                pc[s] += 1;
                finish[s] = t + width;
            }
        }
        t += width;
        slots += 1;
    }
    (finish, slots)
}
