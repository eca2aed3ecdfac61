//! Named, seeded random streams.
//!
//! Each consumer of randomness owns its own [`RngStream`]; a stream is fully
//! determined by `(seed, stream id, substream index)`, so the draw sequence is
//! reproducible across runs and independent of thread scheduling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Consumers of randomness. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    WeightInit = 1,
    DelayInit = 2,
    MembraneNoise = 3,
    Dataset = 4,
    Measurement = 5,
    Scenario = 6,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: StreamId,
    index: u32,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: StreamId) -> Self {
        Self::substream(seed, stream, 0)
    }

    /// An independent stream for item `index` of a batch (one stimulus, one
    /// scenario, ...).
    pub fn substream(seed: u64, stream: StreamId, index: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((stream as u64) << 32) | u64::from(index));
        RngStream {
            seed,
            stream,
            index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> StreamId {
        self.stream
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// Gaussian draw; `std` must be non-negative.
    pub fn gaussian(&mut self, mean: f64, std: f64) -> Result<f64> {
        if !(std >= 0.0) {
            return Err(Error::Argument(format!("standard deviation must be >= 0, got {std}")));
        }
        Ok(self.gaussian_unchecked(mean, std))
    }

    #[inline]
    pub(crate) fn gaussian_unchecked(&mut self, mean: f64, std: f64) -> f64 {
        if std == 0.0 {
            return mean;
        }
        let z: f64 = StandardNormal.sample(&mut self.rng);
        mean + std * z
    }

    /// Uniform draw in `[low, high)`.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        self.rng.random_range(low..high)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Draw one Gaussian sample from `stream`.
pub fn draw_gaussian(stream: &mut RngStream, mean: f64, std: f64) -> Result<f64> {
    stream.gaussian(mean, std)
}
