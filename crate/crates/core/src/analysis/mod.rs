//! Convergence checks for the delay rule, direction selectivity and kernel
//! snapshots.

pub mod lemma;
pub mod selectivity;
pub mod snapshot;
pub mod verify;
pub mod experiment;
