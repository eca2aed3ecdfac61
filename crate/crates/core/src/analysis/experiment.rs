//! The moving-dots experiment end to end: generate, train, measure.

use std::time::{Duration, Instant};

use crate::analysis::selectivity::{measure_selectivity_with, SelectivityMatrix};
use crate::config::SimConfig;
use crate::dataset::generate_dataset_with;
use crate::error::Result;
use crate::network::{Network, TrainingSummary};
use crate::par::{self, Exec};

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub seed: u64,
    pub summary: TrainingSummary,
    pub selectivity: SelectivityMatrix,
    pub elapsed: Duration,
}

/// One run with `seed` driving both the dataset and the network.
pub fn run_experiment(cfg: &SimConfig, seed: u64, max_epochs: usize) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    let cfg = SimConfig {
        rng_seed: seed,
        ..cfg.clone()
    };
    let ds = generate_dataset_with(&cfg, seed, Exec::Sequential);
    let mut net = Network::build(&cfg)?;
    let summary = net.train(&ds, max_epochs)?;
    let selectivity = measure_selectivity_with(&net, &ds, Exec::Sequential)?;
    Ok(ExperimentOutcome {
        seed,
        summary,
        selectivity,
        elapsed: start.elapsed(),
    })
}

/// Independent runs, one per seed. Each run is sequential inside; the batch
/// is spread over the pool when `exec` is parallel.
pub fn run_seeds(cfg: &SimConfig, seeds: &[u64], max_epochs: usize, exec: Exec) -> Vec<Result<ExperimentOutcome>> {
    par::map_indexed(exec, seeds, |_, &seed| run_experiment(cfg, seed, max_epochs))
}
