//! Learning rules applied at the end of each stimulus.
//!
//! Both the weight rule and the delay rule are driven by the same timing
//! difference `dt = t_post - (t_pre + delay)`, i.e. post firing time minus the
//! arrival time of the pre spike. Potentiation (`dt >= 0`) pairs with a delay
//! decrease, depression with a delay increase.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::types::{Kernel, TimePoint, KERNEL_CELLS};

/// Post firing time minus pre arrival time.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PairTiming(pub f64);

impl PairTiming {
    /// Computed as `t_post - (t_pre + delay)` so that a post spike triggered
    /// by an arrival scheduled at `t_pre + delay` yields exactly `0.0`.
    pub fn new(t_pre: TimePoint, t_post: TimePoint, delay: f64) -> Self {
        PairTiming(t_post - (t_pre + delay))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Delay-aware STDP weight change.
pub fn stdp_delta_w(timing: PairTiming, cfg: &SimConfig) -> f64 {
    let dt = timing.0;
    if dt >= 0.0 {
        cfg.a_plus * (-dt / cfg.tau_plus).exp()
    } else {
        -cfg.a_minus * (dt / cfg.tau_minus).exp()
    }
}

/// Delay change for a given timing.
pub fn delay_delta_d(timing: PairTiming, cfg: &SimConfig) -> f64 {
    delay_rule(timing.0, cfg.b_minus, cfg.b_plus, cfg.sigma_minus, cfg.sigma_plus)
}

/// The delay rule with explicit parameters: `-B- exp(-dt/sigma-)` for
/// `dt >= 0`, `+B+ exp(dt/sigma+)` otherwise.
#[inline]
pub fn delay_rule(dt: f64, b_minus: f64, b_plus: f64, sigma_minus: f64, sigma_plus: f64) -> f64 {
    if dt >= 0.0 {
        -b_minus * (-dt / sigma_minus).exp()
    } else {
        b_plus * (dt / sigma_plus).exp()
    }
}

/// One (pre, post) pair observed in a stimulus, resolved to the shared synapse
/// it went through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    pub feature: usize,
    pub cell: usize,
    pub timing: PairTiming,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PlasticityReport {
    /// Realised weight change per feature and kernel cell.
    pub weight_deltas: Vec<[f64; KERNEL_CELLS]>,
    /// Realised delay change per feature and kernel cell.
    pub delay_deltas: Vec<[f64; KERNEL_CELLS]>,
    /// All features frozen so far.
    pub frozen_features: BTreeSet<usize>,
    /// Features that froze during this update.
    pub newly_frozen: BTreeSet<usize>,
}

impl PlasticityReport {
    fn zeroed(features: usize) -> Self {
        PlasticityReport {
            weight_deltas: vec![[0.0; KERNEL_CELLS]; features],
            delay_deltas: vec![[0.0; KERNEL_CELLS]; features],
            ..Default::default()
        }
    }

    /// Add the realised changes of another update step into this report.
    pub fn absorb(&mut self, other: &PlasticityReport) {
        for (acc, d) in self.weight_deltas.iter_mut().zip(&other.weight_deltas) {
            acc.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        for (acc, d) in self.delay_deltas.iter_mut().zip(&other.delay_deltas) {
            acc.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        }
        self.frozen_features.extend(other.frozen_features.iter().copied());
        self.newly_frozen.extend(other.newly_frozen.iter().copied());
    }
}

#[inline]
fn clamp_weight(w: f64, cfg: &SimConfig) -> f64 {
    w.clamp(cfg.w_min, cfg.w_max)
}

#[inline]
fn floor_delay(d: f64, cfg: &SimConfig) -> f64 {
    d.max(cfg.delay_min)
}

/// Batch STDP and delay learning over every pair of a stimulus.
///
/// Shared synapses receive the mean of the per-location deltas. Frozen
/// features keep learning weights but their delays are left untouched.
pub fn apply_pair_updates(
    pairs: &[PairSample],
    kernels: &mut [Kernel],
    frozen: &[bool],
    cfg: &SimConfig,
) -> Result<PlasticityReport> {
    if frozen.len() != kernels.len() {
        return Err(Error::Structural(format!(
            "{} freeze flags for {} features",
            frozen.len(),
            kernels.len()
        )));
    }
    let features = kernels.len();
    let mut sum_w = vec![[0.0f64; KERNEL_CELLS]; features];
    let mut sum_d = vec![[0.0f64; KERNEL_CELLS]; features];
    let mut count = vec![[0u32; KERNEL_CELLS]; features];
    for pair in pairs {
        if pair.feature >= features || pair.cell >= KERNEL_CELLS {
            return Err(Error::Structural(format!(
                "pair references unknown synapse (feature {}, cell {})",
                pair.feature, pair.cell
            )));
        }
        sum_w[pair.feature][pair.cell] += stdp_delta_w(pair.timing, cfg);
        sum_d[pair.feature][pair.cell] += delay_delta_d(pair.timing, cfg);
        count[pair.feature][pair.cell] += 1;
    }

    let mut report = PlasticityReport::zeroed(features);
    for f in 0..features {
        for c in 0..KERNEL_CELLS {
            let n = count[f][c];
            if n == 0 {
                continue;
            }
            let syn = &mut kernels[f][c];
            let w = clamp_weight(syn.weight + sum_w[f][c] / n as f64, cfg);
            report.weight_deltas[f][c] = w - syn.weight;
            syn.weight = w;
            if !frozen[f] {
                let d = floor_delay(syn.delay + sum_d[f][c] / n as f64, cfg);
                report.delay_deltas[f][c] = d - syn.delay;
                syn.delay = d;
            }
        }
    }
    report.frozen_features = frozen_set(frozen);
    Ok(report)
}

pub(crate) fn frozen_set(frozen: &[bool]) -> BTreeSet<usize> {
    frozen.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
}

/// `K = (R_target - R_observed) / R_target`.
pub fn homeostasis_factor(r_target: f64, r_observed: f64) -> Result<f64> {
    if !(r_target > 0.0) {
        return Err(Error::Argument(format!("target rate must be > 0, got {r_target}")));
    }
    if !(r_observed >= 0.0) {
        return Err(Error::Argument(format!("observed rate must be >= 0, got {r_observed}")));
    }
    Ok((r_target - r_observed) / r_target)
}

/// Shift all weights of one feature up by `lambda_w * K` and all its delays
/// down by `lambda_d * K`. Delays of a frozen feature are left alone.
pub fn apply_homeostasis(kernel: &mut Kernel, k: f64, frozen: bool, cfg: &SimConfig) {
    for syn in kernel.iter_mut() {
        syn.weight = clamp_weight(syn.weight + cfg.lambda_w * k, cfg);
        if !frozen {
            syn.delay = floor_delay(syn.delay - cfg.lambda_d * k, cfg);
        }
    }
}

/// Stop condition: true iff some delay is strictly below `c`.
pub fn check_freeze(delays: &[f64], c: f64) -> Result<bool> {
    if delays.is_empty() {
        return Err(Error::Argument("freeze check needs at least one delay".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Argument(format!("freeze constant must be > 0, got {c}")));
    }
    Ok(delays.iter().any(|&d| d < c))
}

/// Add `growth` to every delay of an unfrozen feature.
pub fn apply_growth(kernel: &mut Kernel, growth: f64) {
    debug_assert!(growth >= 0.0);
    for syn in kernel.iter_mut() {
        syn.delay += growth;
    }
}

/// Exponential moving average of per-stimulus firing counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub value: f64,
    pub decay: f64,
}

impl RateEstimate {
    pub fn new(decay: f64) -> Self {
        RateEstimate { value: 0.0, decay }
    }

    pub fn observe(&mut self, count: f64) -> f64 {
        self.value = self.decay * self.value + (1.0 - self.decay) * count;
        self.value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::SynapseParams;
    use proptest::prelude::*;

    fn cfg() -> SimConfig {
        SimConfig::default()
    }

    fn kernel(w: f64, d: f64) -> Kernel {
        [SynapseParams::new(w, d); KERNEL_CELLS]
    }

    #[test]
    fn stdp_at_zero_is_a_plus() {
        assert_eq!(stdp_delta_w(PairTiming(0.0), &cfg()), 5.0);
    }

    #[test]
    fn stdp_vanishes_for_large_positive_timing() {
        let w = stdp_delta_w(PairTiming(1e6), &cfg());
        assert!((0.0..1e-300).contains(&w));
    }

    #[test]
    fn stdp_depression_one_time_constant() {
        let w = stdp_delta_w(PairTiming(-0.0001), &cfg());
        assert!((w - (-1.8393972058572117)).abs() < 1e-12, "{w}");
    }

    #[test]
    fn delay_rule_at_zero_is_minus_b_minus() {
        assert_eq!(delay_delta_d(PairTiming(0.0), &cfg()), -5.0);
    }

    #[test]
    fn delay_rule_vanishes_for_large_negative_timing() {
        let d = delay_delta_d(PairTiming(-1e6), &cfg());
        assert!((0.0..1e-300).contains(&d));
    }

    #[test]
    fn delay_rule_unit_constants() {
        let c = SimConfig {
            b_minus: 1.0,
            sigma_minus: 1.0,
            ..cfg()
        };
        let d = delay_delta_d(PairTiming(2.0), &c);
        assert!((d - (-0.1353352832366127)).abs() < 1e-12, "{d}");
    }

    #[test]
    fn pair_timing_is_exact_for_the_triggering_arrival() {
        let (t_pre, delay) = (3.0, 50.013_000_000_000_1);
        let arrival = t_pre + delay;
        assert_eq!(PairTiming::new(t_pre, arrival, delay).value(), 0.0);
    }

    #[test]
    fn no_pairs_no_update() {
        let mut ks = vec![kernel(0.5, 10.0)];
        let before = ks.clone();
        let r = apply_pair_updates(&[], &mut ks, &[false], &cfg()).unwrap();
        assert_eq!(ks, before);
        assert!(r.weight_deltas[0].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn single_location_zero_timing_drops_delay_by_b_minus() {
        let mut ks = vec![kernel(0.5, 10.0)];
        let pairs = [PairSample {
            feature: 0,
            cell: 7,
            timing: PairTiming(0.0),
        }];
        let r = apply_pair_updates(&pairs, &mut ks, &[false], &cfg()).unwrap();
        assert_eq!(ks[0][7].delay, 5.0);
        assert_eq!(r.delay_deltas[0][7], -5.0);
        assert_eq!(ks[0][7].weight, 1.0, "clamped at w_max");
        assert_eq!(ks[0][6], SynapseParams::new(0.5, 10.0));
    }

    #[test]
    fn shared_synapse_takes_mean_of_locations() {
        // Two timings chosen so the delay rule gives exactly -0.2 and -0.4:
        // dt = -sigma * ln(delta / B).
        let c = SimConfig {
            b_minus: 1.0,
            sigma_minus: 1.0,
            ..cfg()
        };
        let t1 = -(0.2f64).ln();
        let t2 = -(0.4f64).ln();
        let mut ks = vec![kernel(0.5, 10.0)];
        let pairs = [
            PairSample {
                feature: 0,
                cell: 3,
                timing: PairTiming(t1),
            },
            PairSample {
                feature: 0,
                cell: 3,
                timing: PairTiming(t2),
            },
        ];
        apply_pair_updates(&pairs, &mut ks, &[false], &c).unwrap();
        assert!((ks[0][3].delay - 9.7).abs() < 1e-12, "{}", ks[0][3].delay);
    }

    #[test]
    fn frozen_feature_learns_weights_not_delays() {
        let mut ks = vec![kernel(0.5, 10.0), kernel(0.5, 10.0)];
        let pairs = [
            PairSample {
                feature: 1,
                cell: 0,
                timing: PairTiming(0.0),
            },
            PairSample {
                feature: 0,
                cell: 0,
                timing: PairTiming(0.0),
            },
        ];
        let r = apply_pair_updates(&pairs, &mut ks, &[false, true], &cfg()).unwrap();
        assert_eq!(ks[1][0].delay, 10.0);
        assert_eq!(ks[1][0].weight, 1.0);
        assert_eq!(ks[0][0].delay, 5.0);
        assert_eq!(r.frozen_features, BTreeSet::from([1]));
    }

    #[test]
    fn unknown_synapse_is_structural_error() {
        let mut ks = vec![kernel(0.5, 10.0)];
        let bad = [PairSample {
            feature: 3,
            cell: 0,
            timing: PairTiming(0.0),
        }];
        assert!(matches!(
            apply_pair_updates(&bad, &mut ks, &[false], &cfg()),
            Err(Error::Structural(_))
        ));
        let bad = [PairSample {
            feature: 0,
            cell: 25,
            timing: PairTiming(0.0),
        }];
        assert!(apply_pair_updates(&bad, &mut ks, &[false], &cfg()).is_err());
    }

    #[test]
    fn homeostasis_factor_cases() {
        assert_eq!(homeostasis_factor(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(homeostasis_factor(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(homeostasis_factor(2.0, 3.0).unwrap(), -0.5);
        assert!(homeostasis_factor(0.0, 1.0).is_err());
        assert!(homeostasis_factor(-1.0, 1.0).is_err());
    }

    #[test]
    fn homeostasis_updates() {
        let c = cfg();
        let mut k = kernel(0.5, 50.0);
        apply_homeostasis(&mut k, 0.0, false, &c);
        assert_eq!(k, kernel(0.5, 50.0));

        apply_homeostasis(&mut k, 1.0, false, &c);
        assert!((k[0].weight - 0.51).abs() < 1e-12);
        assert!((k[0].delay - 49.9).abs() < 1e-12);

        let mut k = kernel(0.5, 50.0);
        apply_homeostasis(&mut k, -1.0, false, &c);
        assert!((k[0].delay - 50.1).abs() < 1e-12);
        assert!((k[0].weight - 0.49).abs() < 1e-12);

        let mut k = kernel(0.5, 50.0);
        apply_homeostasis(&mut k, 1.0, true, &c);
        assert_eq!(k[0].delay, 50.0);
    }

    #[test]
    fn homeostasis_respects_bounds() {
        let c = cfg();
        let mut k = kernel(0.999, 0.01);
        apply_homeostasis(&mut k, 10.0, false, &c);
        assert_eq!(k[0].weight, c.w_max);
        assert_eq!(k[0].delay, c.delay_min);
    }

    #[test]
    fn freeze_condition() {
        assert!(check_freeze(&[0.0005, 3.0, 7.0], 0.001).unwrap());
        assert!(!check_freeze(&[0.001, 0.001], 0.001).unwrap());
        assert!(!check_freeze(&[0.001 + 1e-12; 25], 0.001).unwrap());
        assert!(check_freeze(&[], 0.001).is_err());
        assert!(check_freeze(&[1.0], 0.0).is_err());
    }

    #[test]
    fn growth() {
        let mut k = kernel(0.5, 50.0);
        apply_growth(&mut k, 0.0001);
        assert!((k[4].delay - 50.0001).abs() < 1e-12);
        let mut k = kernel(0.5, 50.0);
        apply_growth(&mut k, 0.0);
        assert_eq!(k, kernel(0.5, 50.0));
    }

    #[test]
    fn rate_estimate_tracks_counts() {
        let mut r = RateEstimate::new(0.9);
        assert_eq!(r.observe(0.0), 0.0);
        assert!((r.observe(10.0) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn weight_and_delay_changes_have_opposite_signs(dt in -0.01f64..0.01, wide in -100.0f64..100.0) {
            let c = cfg();
            for t in [dt, wide] {
                let dw = stdp_delta_w(PairTiming(t), &c);
                let dd = delay_delta_d(PairTiming(t), &c);
                prop_assert!(dw * dd <= 0.0);
            }
        }

        #[test]
        fn branch_functions_shrink_away_from_zero(a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let c = SimConfig { tau_plus: 1.0, tau_minus: 1.0, sigma_plus: 1.0, sigma_minus: 1.0, ..cfg() };
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(stdp_delta_w(PairTiming(hi), &c) <= stdp_delta_w(PairTiming(lo), &c));
            prop_assert!(delay_delta_d(PairTiming(hi), &c).abs() <= delay_delta_d(PairTiming(lo), &c).abs());
            let (nlo, nhi) = (-hi - 1e-9, -lo - 1e-9);
            prop_assert!(stdp_delta_w(PairTiming(nlo), &c).abs() <= stdp_delta_w(PairTiming(nhi), &c).abs());
            prop_assert!(delay_delta_d(PairTiming(nlo), &c) <= delay_delta_d(PairTiming(nhi), &c));
        }

        #[test]
        fn bounds_hold_after_arbitrary_updates(
            timings in proptest::collection::vec((-0.01f64..0.01, 0usize..KERNEL_CELLS), 0..200),
            ks in proptest::collection::vec(-20.0f64..20.0, 0..20),
        ) {
            let c = cfg();
            let mut kernels = vec![kernel(0.95, 50.0)];
            for chunk in timings.chunks(7) {
                let pairs: Vec<_> = chunk.iter().map(|&(t, cell)| PairSample { feature: 0, cell, timing: PairTiming(t) }).collect();
                apply_pair_updates(&pairs, &mut kernels, &[false], &c).unwrap();
            }
            for k in ks {
                apply_homeostasis(&mut kernels[0], k, false, &c);
            }
            for syn in kernels[0].iter() {
                prop_assert!(syn.weight >= c.w_min && syn.weight <= c.w_max);
                prop_assert!(syn.delay > 0.0);
            }
        }
    }
}
