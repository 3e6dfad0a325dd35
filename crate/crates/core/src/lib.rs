//! Behavioral simulation of stateful NOT/NOR logic in gain-cell eDRAM
//! sub-arrays, with a Monte Carlo variation engine and a compiler from
//! Boolean expressions to NOR/NOT micro-op programs.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the common instantiations.

// `!(x > 0)` is used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array;
pub mod charge;
pub mod compiler;
pub mod error;
pub mod ledger;
pub mod montecarlo;
pub mod scalar;

pub use array::{availability, trace_to_csv, MicroOp, SubArray, TimingEnergyConfig, TraceSample};
pub use charge::{CellParams, CellState, ModelConfig, Ns};
pub use error::{Error, Result};
pub use ledger::{EventLedger, LedgerEntry, OpKind};
pub use scalar::Scalar;

pub type SubArrayF64 = SubArray<f64>;
pub type SubArrayF32 = SubArray<f32>;
pub type ModelConfigF64 = ModelConfig<f64>;
pub type ModelConfigF32 = ModelConfig<f32>;
pub type TimingEnergyConfigF64 = TimingEnergyConfig<f64>;
pub type TimingEnergyConfigF32 = TimingEnergyConfig<f32>;
pub type EventLedgerF64 = EventLedger<f64>;
pub type VariationConfigF64 = montecarlo::VariationConfig<f64>;
pub type SimOptionsF64 = compiler::SimOptions<f64>;
pub type SimOptionsF32 = compiler::SimOptions<f32>;
