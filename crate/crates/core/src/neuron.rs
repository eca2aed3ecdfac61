//! Leaky integrate-and-fire neuron with first-spike coding and a linearly
//! adapting threshold.
//!
//! Synapses are delta-current: an arriving spike adds its weight to the
//! membrane instantly. The potential decays as `exp(-t / tau_m)` towards 0.

use crate::types::TimePoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub potential: f64,
    pub threshold: f64,
    /// Time of the single spike allowed per stimulus.
    pub fired_at: Option<TimePoint>,
    /// Suppressed by a neighbour at the same location for the rest of the stimulus.
    pub inhibited: bool,
    /// Time at which `potential` was last brought up to date.
    pub updated_at: TimePoint,
}

impl NeuronState {
    pub fn new(threshold: f64) -> Self {
        NeuronState {
            potential: 0.0,
            threshold,
            fired_at: None,
            inhibited: false,
            updated_at: 0.0,
        }
    }

    /// True while the neuron may still integrate and fire this stimulus.
    #[inline]
    pub fn is_active(&self) -> bool {
        self.fired_at.is_none() && !self.inhibited
    }

    /// Decay the potential from `updated_at` up to `now`.
    #[inline]
    pub fn leak_to(&mut self, now: TimePoint, tau_m: f64) {
        let elapsed = now - self.updated_at;
        if elapsed > 0.0 {
            self.potential *= (-elapsed / tau_m).exp();
            self.updated_at = now;
        }
    }

    /// Deliver `charge` at exactly `at`, then test the threshold there.
    /// Returns whether the neuron fired.
    #[inline]
    pub fn receive(&mut self, at: TimePoint, charge: f64, tau_m: f64) -> bool {
        if !self.is_active() {
            return false;
        }
        self.leak_to(at, tau_m);
        self.potential += charge;
        let (next, fired) = check_fire(*self, at);
        *self = next;
        fired
    }
}

/// One fixed-step update: `p' = p * exp(-dt / tau_m) + incoming_charge + noise`.
/// No threshold test.
pub fn integrate_step(state: NeuronState, incoming_charge: f64, dt: f64, noise: f64, tau_m: f64) -> NeuronState {
    NeuronState {
        potential: state.potential * (-dt / tau_m).exp() + incoming_charge + noise,
        updated_at: state.updated_at + dt,
        ..state
    }
}

/// Fire at `now` if the potential reached the threshold (inclusive) and the
/// neuron is still allowed to spike.
pub fn check_fire(state: NeuronState, now: TimePoint) -> (NeuronState, bool) {
    if state.is_active() && state.potential >= state.threshold {
        (
            NeuronState {
                fired_at: Some(now),
                ..state
            },
            true,
        )
    } else {
        (state, false)
    }
}

/// End-of-stimulus threshold adaptation: up after a spike, down otherwise,
/// never below `floor`.
pub fn adapt_threshold(state: NeuronState, fired_this_stimulus: bool, up: f64, down: f64, floor: f64) -> NeuronState {
    let threshold = if fired_this_stimulus {
        state.threshold + up
    } else {
        (state.threshold - down).max(floor)
    };
    NeuronState { threshold, ..state }
}

/// Back to rest for the next stimulus. The adapted threshold is kept.
pub fn reset(state: NeuronState) -> NeuronState {
    NeuronState {
        threshold: state.threshold,
        ..NeuronState::new(state.threshold)
    }
}
