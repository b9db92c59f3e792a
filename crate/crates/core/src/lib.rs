//! Deterministic simulation and verification of anonymous crash-prone
//! shared-memory protocols.
//!
//! The crate bundles:
//! - a cooperative simulator of n anonymous processes over n multi-writer
//!   registers with crash injection and exhaustive schedule exploration
//!   ([`sim`]);
//! - the protocol stack built on it: a non-blocking atomic weak set
//!   ([`weakset`]), wait-free safe agreement, t-resilient (t+1)-set
//!   agreement and b-iterated barycentric agreement ([`agreement`]), and an
//!   anonymous BG-simulation of non-anonymous snapshot protocols
//!   ([`bgsim`]);
//! - combinatorial topology for colorless tasks: complexes, barycentric
//!   subdivision, skeleta, carrier maps and the set-agreement-plus-
//!   subdivision task solver ([`topology`]);
//! - trace checkers that make the correctness arguments executable:
//!   linearization-point construction, a brute-force linearizability
//!   oracle, potential-function monitors and agreement-condition verdicts
//!   ([`verify`]).

pub mod agreement;
pub mod bgsim;
pub mod sim;
pub mod topology;
pub mod value;
pub mod verify;
pub mod weakset;

pub use sim::{
    CrashPlan, CrashPoint, CrashRule, Event, EventKind, MemOp, MemResponse, ModelConfig,
    ObjectId, OpKind, Program, RetVal, RunOutput, SchedulePolicy, SimError, Trace,
};
pub use value::{ValueArena, Vid};
