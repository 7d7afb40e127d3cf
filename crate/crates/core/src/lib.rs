//! Cyclic quorum systems for distributed all-pairs computation.
//!
//! The pipeline runs in five stages, each in its own module:
//!
//! * [`diffset`] searches for and verifies relaxed difference sets modulo `p`.
//! * [`quorum`] turns a difference set into `p` cyclic quorums and checks the
//!   quorum properties, including the all-pairs property.
//! * [`partition`] ingests element data and splits it into `p` near-equal blocks.
//! * [`schedule`] assigns every unordered block pair to exactly one worker
//!   whose quorum holds both blocks.
//! * [`engine`] executes a pairwise kernel with each worker holding only its
//!   quorum's blocks, then merges the results.
//!
//! Block and worker indices are 0-based everywhere in the library.

pub mod diffset;
pub mod engine;
pub mod error;
pub mod partition;
pub mod quorum;
pub mod schedule;

pub use diffset::{DiffsetCache, DifferenceSet};
pub use engine::{Kernel, KernelResult, ReplicationStats, RunOptions, RunOutput, RunReport, WorkerTrace};
pub use error::{Error, Result};
pub use partition::{ElementTable, Format, Partition};
pub use quorum::{AllPairs, PropertyReport, QuorumSystem, WitnessMap};
pub use schedule::{BalanceReport, Policy, Schedule};


/// Number of unordered pairs `(j, k)` with `j <= k < p`.
pub fn block_pair_count(p: usize) -> usize {
    p * (p + 1) / 2
}

/// Position of the unordered pair `(j, k)`, `j <= k < p`, in row-major
/// upper-triangular order.
pub(crate) fn tri_index(p: usize, j: usize, k: usize) -> usize {
    debug_assert!(j <= k && k < p);
    j * p - j * (j + 1) / 2 + k
}
