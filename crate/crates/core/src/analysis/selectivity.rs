//! Which motion direction each feature map responds to.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Direction};
use crate::error::Result;
use crate::network::{Network, FEATURES};
use crate::par::{self, Exec};
use crate::rng::{RngStream, StreamId};

/// `counts[feature][direction]`: number of stimuli of that direction on which
/// the map fired at least once, directions indexed like [`Direction::ALL`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectivityMatrix {
    pub counts: [[usize; 4]; FEATURES],
    /// Strict argmax direction per feature; `None` when silent or tied.
    pub preferred: [Option<Direction>; FEATURES],
    /// Every feature has a distinct preferred direction.
    pub bijective: bool,
}

impl SelectivityMatrix {
    pub fn from_counts(counts: [[usize; 4]; FEATURES]) -> Self {
        let preferred = counts.map(|row| {
            let max = *row.iter().max().unwrap_or(&0);
            if max == 0 || row.iter().filter(|&&c| c == max).count() > 1 {
                return None;
            }
            row.iter().position(|&c| c == max).map(|i| Direction::ALL[i])
        });
        let mut seen = [false; 4];
        let bijective = preferred.iter().all(|p| match p {
            Some(d) if !seen[d.index()] => {
                seen[d.index()] = true;
                true
            }
            _ => false,
        });
        SelectivityMatrix {
            counts,
            preferred,
            bijective,
        }
    }
}

/// Present every stimulus to a frozen copy of `net` (no learning, no
/// threshold adaptation) and tally map firings per direction. Membrane noise
/// for stimulus `i` comes from substream `i` of the measurement stream of the
/// network's seed.
pub fn measure_selectivity(net: &Network, ds: &Dataset) -> Result<SelectivityMatrix> {
    measure_selectivity_with(net, ds, Exec::default())
}

pub fn measure_selectivity_with(net: &Network, ds: &Dataset, exec: Exec) -> Result<SelectivityMatrix> {
    let seed = net.config().rng_seed;
    let per_stimulus = par::map_indexed(exec, &ds.stimuli, |i, stim| -> Result<(Direction, Vec<usize>)> {
        let mut noise = RngStream::substream(seed, StreamId::Measurement, i as u32);
        let record = net.simulate_detached(stim, &mut noise)?;
        Ok((stim.direction, record.firings_per_feature(FEATURES)))
    });
    let mut counts = [[0usize; 4]; FEATURES];
    for item in per_stimulus {
        let (dir, firings) = item?;
        for (f, c) in firings.into_iter().enumerate() {
            counts[f][dir.index()] += usize::from(c > 0);
        }
    }
    Ok(SelectivityMatrix::from_counts(counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::dataset::generate_dataset;
    use crate::types::{cell_index, SynapseParams, KERNEL, KERNEL_CELLS};

    #[test]
    fn unreachable_threshold_gives_zero_matrix() {
        let cfg = SimConfig {
            threshold: 1e6,
            ..SimConfig::default()
        };
        let net = Network::build(&cfg).unwrap();
        let m = measure_selectivity(&net, &generate_dataset(&cfg, 1)).unwrap();
        assert_eq!(m.counts, [[0; 4]; FEATURES]);
        assert!(!m.bijective);
    }

    #[test]
    fn delays_aligned_to_a_trajectory_select_its_direction() {
        // A +45 degree dot visits cell (k, k) at t = k; delay 10 - k makes all
        // five arrivals coincide at t = 10. The reverse direction spreads them
        // over 8 time units, which the leak keeps below threshold.
        let cfg = SimConfig {
            noise_std: 0.0,
            ..SimConfig::default()
        };
        let silent = [SynapseParams::new(0.0, 10.0); KERNEL_CELLS];
        let mut tuned = silent;
        for k in 0..KERNEL {
            tuned[cell_index(k, k)] = SynapseParams::new(0.95, 10.0 - k as f64);
        }
        let net = Network::from_kernels(&cfg, vec![tuned, silent, silent, silent]).unwrap();
        let before = net.kernels().to_vec();
        let m = measure_selectivity(&net, &generate_dataset(&cfg, 5)).unwrap();
        assert_eq!(m.preferred[0], Some(Direction::Deg45), "{:?}", m.counts);
        assert_eq!(m.counts[1..], [[0; 4]; 3]);
        assert_eq!(net.kernels(), &before[..]);
    }

    #[test]
    fn argmax_and_bijection() {
        let m = SelectivityMatrix::from_counts([[5, 1, 0, 0], [0, 7, 1, 1], [0, 0, 3, 2], [1, 1, 1, 9]]);
        assert!(m.bijective);
        assert_eq!(m.preferred[1], Some(Direction::Deg135));

        let m = SelectivityMatrix::from_counts([[5, 1, 0, 0], [6, 1, 0, 0], [0, 0, 3, 2], [1, 1, 1, 9]]);
        assert!(!m.bijective, "two features prefer the same direction");

        let m = SelectivityMatrix::from_counts([[0; 4]; 4]);
        assert_eq!(m.preferred, [None; 4]);
        assert!(!m.bijective);

        let m = SelectivityMatrix::from_counts([[3, 3, 0, 0], [0, 7, 1, 1], [0, 0, 3, 2], [1, 1, 1, 9]]);
        assert_eq!(m.preferred[0], None, "ties have no preference");
        assert!(!m.bijective);
    }
}
