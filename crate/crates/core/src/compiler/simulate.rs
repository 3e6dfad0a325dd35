//! Executes compiled programs: logically, on a nominal sub-array, or as a
//! Monte Carlo campaign over sampled variation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::program::{PimProgram, Step};
use crate::array::{SubArray, TimingEnergyConfig, TraceSample, DEFAULT_COLS, DEFAULT_ROWS};
use crate::charge::ModelConfig;
use crate::error::{Error, Result};
use crate::ledger::EventLedger;
use crate::montecarlo::{combo_key, ComboResult, SuccessReport, TrialRecord, VariationConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Ideal,
    Nominal,
    #[serde(rename = "mc")]
    MonteCarlo,
}

impl std::str::FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(SimMode::Ideal),
            "nominal" => Ok(SimMode::Nominal),
            "mc" | "montecarlo" => Ok(SimMode::MonteCarlo),
            other => Err(Error::Usage(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOptions<S> {
    pub model: ModelConfig<S>,
    pub timing: TimingEnergyConfig<S>,
    /// Required in Monte Carlo mode.
    pub variation: Option<VariationConfig<S>>,
    pub trials: usize,
    /// Columns to record waveforms for (nominal mode).
    pub trace_columns: Option<Vec<usize>>,
}

impl<S: Scalar> SimOptions<S> {
    pub fn nominal() -> Self {
        SimOptions {
            model: ModelConfig::nominal(),
            timing: TimingEnergyConfig::nominal(),
            variation: None,
            trials: 1000,
            trace_columns: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome<S> {
    /// One row per input vector, one bit per program output. In Monte Carlo
    /// mode these are the ideal reference values.
    pub outputs: Vec<Vec<bool>>,
    pub ledger: Option<EventLedger<S>>,
    pub trace: Vec<TraceSample<S>>,
    pub report: Option<SuccessReport>,
}

fn check_vectors(program: &PimProgram, vectors: &[Vec<bool>]) -> Result<()> {
    if vectors.len() > DEFAULT_COLS {
        return Err(Error::WidthMismatch {
            expected: DEFAULT_COLS,
            got: vectors.len(),
        });
    }
    if let Some(v) = vectors.iter().find(|v| v.len() != program.inputs.len()) {
        return Err(Error::WidthMismatch {
            expected: program.inputs.len(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Runs every op at its recorded start time. Vector `c` occupies column `c`;
/// unused columns hold zeros. Returns the sensed outputs per vector.
pub fn run_on_array<S: Scalar>(
    program: &PimProgram,
    vectors: &[Vec<bool>],
    array: &mut SubArray<S>,
) -> Result<Vec<Vec<bool>>> {
    let cols = array.cols();
    let mut sensed: Vec<Option<Vec<bool>>> = vec![None; program.outputs.len()];
    for op in &program.ops {
        let micro = op.step.to_micro_op(vectors, cols);
        let bits = array.execute(&micro, op.t_start_ns)?;
        if let (Step::ReadOutput { output, .. }, Some(bits)) = (&op.step, bits) {
            sensed[*output] = Some(bits);
        }
    }
    let sensed: Vec<Vec<bool>> = sensed
        .into_iter()
        .enumerate()
        .map(|(k, s)| s.ok_or_else(|| Error::Program(format!("output {k} is never read"))))
        .collect::<Result<_>>()?;
    Ok((0..vectors.len())
        .map(|c| sensed.iter().map(|row| row[c]).collect())
        .collect())
}

pub fn simulate_program<S: Scalar>(
    program: &PimProgram,
    vectors: &[Vec<bool>],
    mode: SimMode,
    opts: &SimOptions<S>,
) -> Result<SimOutcome<S>> {
    check_vectors(program, vectors)?;
    let ideal: Vec<Vec<bool>> = vectors.iter().map(|v| program.netlist.eval(v)).collect();
    if mode == SimMode::Ideal {
        return Ok(SimOutcome {
            outputs: ideal,
            ledger: None,
            trace: Vec::new(),
            report: None,
        });
    }

    let violations = program.audit(opts.model.drt_logic_ns, &opts.timing);
    if !violations.is_empty() {
        return Err(Error::Program(violations.join("; ")));
    }

    match mode {
        SimMode::Ideal => unreachable!(),
        SimMode::Nominal => {
            let mut array = SubArray::new(opts.model, opts.timing)?;
            if let Some(cols) = &opts.trace_columns {
                array.enable_trace(cols.clone())?;
            }
            let outputs = run_on_array(program, vectors, &mut array)?;
            let trace = array.dump_trace(0..u64::MAX);
            Ok(SimOutcome {
                outputs,
                ledger: Some(array.ledger().clone()),
                trace,
                report: None,
            })
        }
        SimMode::MonteCarlo => {
            let var = opts
                .variation
                .ok_or_else(|| Error::Usage("Monte Carlo mode needs a variation config".into()))?;
            var.validate()?;
            if opts.trials == 0 {
                return Err(Error::Usage("at least one trial is required".into()));
            }
            let report = program_campaign(program, vectors, &ideal, &var, opts)?;
            Ok(SimOutcome {
                outputs: ideal,
                ledger: None,
                trace: Vec::new(),
                report: Some(report),
            })
        }
    }
}

fn program_campaign<S: Scalar>(
    program: &PimProgram,
    vectors: &[Vec<bool>],
    ideal: &[Vec<bool>],
    var: &VariationConfig<S>,
    opts: &SimOptions<S>,
) -> Result<SuccessReport> {
    let per_trial: Vec<Vec<TrialRecord<S>>> = (0..opts.trials)
        .into_par_iter()
        .map(|trial| {
            let sample =
                crate::montecarlo::sample_params(var, &opts.model, DEFAULT_ROWS, DEFAULT_COLS, trial as u64);
            let mut array = SubArray::new(opts.model, opts.timing)?;
            array.set_variation(sample.params.clone(), sample.sa_threshold.clone())?;
            let got = run_on_array(program, vectors, &mut array)?;
            Ok((0..vectors.len())
                .map(|c| {
                    let min_tau = program
                        .input_rows
                        .iter()
                        .zip(&vectors[c])
                        .filter(|(_, &b)| b)
                        .map(|(&r, _)| sample.params[r * DEFAULT_COLS + c].tau_scale)
                        .reduce(S::min);
                    TrialRecord {
                        trial: trial as u64,
                        passed: got[c] == ideal[c],
                        output_voltage: S::zero(),
                        min_tau_scale: min_tau,
                        sa_threshold: sample.sa_threshold[c],
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut by_combo: BTreeMap<String, Vec<TrialRecord<S>>> = BTreeMap::new();
    for records in per_trial {
        for (c, r) in records.into_iter().enumerate() {
            by_combo.entry(combo_key(&vectors[c])).or_default().push(r);
        }
    }
    Ok(SuccessReport {
        combos: by_combo
            .into_iter()
            .map(|(k, rs)| (k, ComboResult::from_records(&rs, &opts.model)))
            .collect(),
    })
}
