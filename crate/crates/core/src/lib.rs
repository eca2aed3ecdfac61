//! Event-scheduled spiking network simulator with unsupervised learning of
//! synaptic delays.
//!
//! The crate provides LIF neurons with first-spike coding, a convolutional
//! two-layer network with shared weights and delays, delay-aware STDP, the
//! delay learning rule with its stop condition and growth term, homeostasis,
//! a moving-dots stimulus generator, and a numerical harness for the
//! convergence properties of the delay rule.

// `!(x > 0.0)` comparisons also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod dataset;
pub mod error;
pub mod network;
pub mod neuron;
pub mod par;
pub mod plasticity;
pub mod queue;
pub mod rng;
pub mod types;

pub use config::{load_config, SimConfig};
pub use dataset::{generate_dataset, read_dataset, write_dataset, Dataset, Direction, Stimulus};
pub use error::{Error, Result};
pub use network::{build_network, ActivityRecord, Network, TrainingSummary};
pub use par::Exec;
pub use types::{NeuronId, SynapseParams, TimePoint};
