use serde::{Deserialize, Serialize};

/// Simulation time in abstract time units; successive stimulus frames are one
/// unit apart.
pub type TimePoint = f64;

/// A learned synapse: efficacy and conduction delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynapseParams {
    pub weight: f64,
    pub delay: f64,
}

impl SynapseParams {
    pub fn new(weight: f64, delay: f64) -> Self {
        SynapseParams { weight, delay }
    }
}

/// Dense id over all neurons of a network: input cells first, then output
/// neurons feature-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId(pub u32);

impl NeuronId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Side length of the square convolution kernel.
pub const KERNEL: usize = 5;
pub const KERNEL_CELLS: usize = KERNEL * KERNEL;

/// Shared parameters of one feature map, row-major over `(ky, kx)`.
pub type Kernel = [SynapseParams; KERNEL_CELLS];

#[inline]
pub fn cell_index(ky: usize, kx: usize) -> usize {
    ky * KERNEL + kx
}
