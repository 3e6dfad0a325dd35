//! Boolean expressions to scheduled NOR/NOT micro-op programs.
//!
//! parse -> lower to a NOR DAG -> allocate rows -> emit -> insert refreshes.

pub mod alloc;
pub mod netlist;
pub mod parse;
pub mod program;
pub mod schedule;
pub mod simulate;

use serde::{Deserialize, Serialize};

pub use alloc::{allocate_rows, RowAssignment, RowBudget};
pub use netlist::{lower_to_nor, LowerOptions, Node, NodeId, NorNetlist};
pub use parse::{parse_program, Expr, ExprKind, Source, Statement};
pub use program::{audit_refresh, audit_rows, insert_refresh, PimProgram, ProgramOp, ProgramStats, Step};
pub use schedule::{schedule, ControlMode, SystemSchedule};
pub use simulate::{run_on_array, simulate_program, SimMode, SimOptions, SimOutcome};

use crate::array::TimingEnergyConfig;
use crate::charge::Ns;
use crate::error::Result;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompileOptions {
    pub max_arity: usize,
    pub rows: RowBudget,
    pub drt_logic_ns: Ns,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_arity: 2,
            rows: RowBudget::default(),
            drt_logic_ns: 5_000,
        }
    }
}

/// Full pipeline from program text.
pub fn compile<S: Scalar>(
    text: &str,
    opts: &CompileOptions,
    timing: &TimingEnergyConfig<S>,
) -> Result<PimProgram> {
    let src = parse_program(text)?;
    compile_source(&src, opts, timing)
}

pub fn compile_source<S: Scalar>(
    src: &Source,
    opts: &CompileOptions,
    timing: &TimingEnergyConfig<S>,
) -> Result<PimProgram> {
    let netlist = lower_to_nor(
        src,
        LowerOptions {
            max_arity: opts.max_arity,
        },
    )?;
    let rows = allocate_rows(&netlist, opts.rows)?;
    let program = PimProgram::emit(&netlist, &rows, opts.rows, timing)?;
    Ok(insert_refresh(&program, opts.drt_logic_ns, timing))
}
