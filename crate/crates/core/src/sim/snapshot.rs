//! Snapshot object backends.
//!
//! The protocols assume an atomic snapshot object over the n registers. A
//! register-based non-blocking construction exists in the literature; here
//! the snapshot is served as an atomic simulator primitive, with this trait
//! as the slot where a register-based implementation can be plugged in
//! without touching the protocol code.

use crate::value::Vid;

/// How `update`/`scan` are served against the register cells. Each call is
/// one atomic simulator step.
pub trait SnapshotBackend {
    fn update(&self, cells: &mut [Vid], index: usize, value: Vid);
    fn scan(&self, cells: &[Vid]) -> Vec<Vid>;
}

/// The atomic-oracle backend: components are the register cells themselves,
/// so a scan is the exact cell array at its step and the n-register space
/// accounting is preserved.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, Debug)]
pub struct AtomicOracle;

impl SnapshotBackend for AtomicOracle {
    fn update(&self, cells: &mut [Vid], index: usize, value: Vid) {
        cells[index] = value;
    }

    fn scan(&self, cells: &[Vid]) -> Vec<Vid> {
        cells.to_vec()
    }
}
