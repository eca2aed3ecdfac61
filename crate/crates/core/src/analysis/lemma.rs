//! Numerical checks of the convergence properties of the delay rule.
//!
//! A single post-synaptic neuron sees the same pre-synaptic pattern over and
//! over. Firing is idealised: the post neuron fires exactly when the last
//! contributing arrival lands, so `t_post = max_i (t_i + d_i)` over the
//! contributing inputs. After every repetition the delay rule is applied to all
//! inputs. With `0 < B- <= sigma-` the following must hold:
//!
//! * a positive timing stays non-negative after the update, because
//!   `B- (1 - exp(-dt / sigma-)) <= dt`;
//! * the input that arrived last keeps `dt = 0`;
//! * the post spike moves earlier by exactly `B-` (plus growth) per repetition;
//! * every contributing `dt` is non-increasing and tends to 0;
//! * inputs arriving after the post spike drift further away, by
//!   `-B- - B+ exp(dt / sigma+)` per repetition.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::plasticity::delay_rule;
use crate::rng::{RngStream, StreamId};
use crate::types::TimePoint;

/// Absolute tolerance for the exact-identity checks.
pub const IDENTITY_TOL: f64 = 1e-9;
/// A timing below this counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaScenario {
    pub pre_times: Vec<TimePoint>,
    pub initial_delays: Vec<f64>,
    /// Inputs taking part in firing the post neuron. The others must arrive
    /// after the post spike.
    pub contributes: Vec<bool>,
    pub b_minus: f64,
    pub b_plus: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub repetitions: usize,
    /// Added to every delay per repetition while learning is active.
    pub growth: f64,
    /// Stop condition constant; `None` disables freezing.
    pub freeze_c: Option<f64>,
}

impl LemmaScenario {
    /// All inputs contributing, no growth, no freezing.
    pub fn new(pre_times: Vec<TimePoint>, initial_delays: Vec<f64>, b_minus: f64, sigma_minus: f64, repetitions: usize) -> Self {
        let n = pre_times.len();
        LemmaScenario {
            pre_times,
            initial_delays,
            contributes: vec![true; n],
            b_minus,
            b_plus: b_minus,
            sigma_minus,
            sigma_plus: sigma_minus,
            repetitions,
            growth: 0.0,
            freeze_c: None,
        }
    }

    /// True when `0 < B- <= sigma-`.
    pub fn premise_holds(&self) -> bool {
        self.b_minus > 0.0 && self.b_minus <= self.sigma_minus
    }

    fn post_time(&self, delays: &[f64]) -> TimePoint {
        self.pre_times
            .iter()
            .zip(delays)
            .zip(&self.contributes)
            .filter(|(_, &c)| c)
            .map(|((t, d), _)| t + d)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.pre_times.len();
        if n == 0 {
            return Err(Error::Argument("scenario needs at least one pre-synaptic input".into()));
        }
        if self.initial_delays.len() != n || self.contributes.len() != n {
            return Err(Error::Argument("times, delays and contribution flags differ in length".into()));
        }
        if !self.contributes.iter().any(|&c| c) {
            return Err(Error::Argument("at least one input must contribute".into()));
        }
        if self.initial_delays.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Argument("initial delays must be finite and > 0".into()));
        }
        if self.pre_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Argument("pre firing times must be finite".into()));
        }
        if !(self.sigma_minus > 0.0 && self.sigma_plus > 0.0) {
            return Err(Error::Argument("time constants must be > 0".into()));
        }
        if !(self.b_minus >= 0.0 && self.b_plus >= 0.0 && self.growth >= 0.0) {
            return Err(Error::Argument("B-, B+ and growth must be >= 0".into()));
        }
        let t_post = self.post_time(&self.initial_delays);
        for i in (0..n).filter(|&i| !self.contributes[i]) {
            if self.pre_times[i] + self.initial_delays[i] <= t_post {
                return Err(Error::Argument(format!("non-contributing input {i} must arrive after the post spike")));
            }
        }
        Ok(())
    }
}

/// One step of the timing recurrence for a contributing input:
/// `dt' = dt - B- + B- exp(-dt / sigma-)`.
pub fn delta_t_recurrence(delta_t: f64, b_minus: f64, sigma_minus: f64) -> Result<f64> {
    if !(delta_t >= 0.0) {
        return Err(Error::Argument(format!("timing must be >= 0, got {delta_t}")));
    }
    if !(b_minus > 0.0 && b_minus <= sigma_minus) {
        return Err(Error::Argument(format!(
            "requires 0 < B- <= sigma-, got B- = {b_minus}, sigma- = {sigma_minus}"
        )));
    }
    Ok(delta_t - b_minus + b_minus * (-delta_t / sigma_minus).exp())
}

/// Recurrence steps until the timing drops below `tol`, or `None` if that
/// takes more than `cap` steps.
pub fn recurrence_iterations(delta_t: f64, b_minus: f64, sigma_minus: f64, tol: f64, cap: usize) -> Result<Option<usize>> {
    let mut dt = delta_t;
    for n in 0..=cap {
        if dt < tol {
            return Ok(Some(n));
        }
        dt = delta_t_recurrence(dt, b_minus, sigma_minus)?.max(0.0);
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LemmaCheck {
    /// (a) positive timings stay non-negative.
    Positivity,
    /// (b) the last arriving input keeps `dt = 0`.
    LastStaysLast,
    /// (c) the post spike shifts by `-B-` (plus growth) per repetition.
    FiringShift,
    /// (d) contributing timings are non-increasing and non-negative.
    Monotone,
    /// (d) contributing timings reach the convergence tolerance.
    Convergence,
    /// (e) late inputs drift away by `-B- - B+ exp(dt / sigma+)`.
    Repulsion,
}

impl LemmaCheck {
    pub const ALL: [LemmaCheck; 6] = [
        LemmaCheck::Positivity,
        LemmaCheck::LastStaysLast,
        LemmaCheck::FiringShift,
        LemmaCheck::Monotone,
        LemmaCheck::Convergence,
        LemmaCheck::Repulsion,
    ];

    pub fn label(self) -> &'static str {
        match self {
            LemmaCheck::Positivity => "positivity",
            LemmaCheck::LastStaysLast => "last-stays-last",
            LemmaCheck::FiringShift => "firing-shift",
            LemmaCheck::Monotone => "monotone",
            LemmaCheck::Convergence => "convergence",
            LemmaCheck::Repulsion => "repulsion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail(String),
    Skipped(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Pass => write!(f, "PASS"),
            Status::Fail(why) => write!(f, "FAIL ({why})"),
            Status::Skipped(why) => write!(f, "SKIP ({why})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub checks: Vec<(LemmaCheck, Status)>,
    /// Post firing time at each repetition, `repetitions + 1` entries.
    pub post_times: Vec<TimePoint>,
    /// `delta_t[i][n]`: timing of input `i` at repetition `n`.
    pub delta_t: Vec<Vec<f64>>,
    pub delays: Vec<Vec<f64>>,
    /// First repetition at which every contributing timing is below
    /// [`CONVERGENCE_TOL`].
    pub converged_at: Option<usize>,
    /// The same, predicted by iterating [`delta_t_recurrence`] on the initial timings.
    pub predicted_convergence: Option<usize>,
    /// Repetition after which the stop condition halted learning.
    pub frozen_at: Option<usize>,
}

impl LemmaReport {
    pub fn status(&self, check: LemmaCheck) -> &Status {
        &self
            .checks
            .iter()
            .find(|(c, _)| *c == check)
            .expect("every check is reported")
            .1
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, s)| !matches!(s, Status::Fail(_)))
    }

    pub fn failures(&self) -> Vec<(LemmaCheck, String)> {
        self.checks
            .iter()
            .filter_map(|(c, s)| match s {
                Status::Fail(why) => Some((*c, why.clone())),
                _ => None,
            })
            .collect()
    }
}

/// Present the scenario's pattern `repetitions` times with ideal firing and
/// evaluate every check.
pub fn run_lemma_suite(scenario: &LemmaScenario) -> Result<LemmaReport> {
    scenario.validate()?;
    let s = scenario;
    let n = s.pre_times.len();
    let reps = s.repetitions;

    let mut delays = s.initial_delays.clone();
    let mut post_times = Vec::with_capacity(reps + 1);
    let mut delta_t = vec![Vec::with_capacity(reps + 1); n];
    let mut delay_hist = vec![Vec::with_capacity(reps + 1); n];
    let mut frozen_at = None;

    for rep in 0..=reps {
        let t_post = s.post_time(&delays);
        post_times.push(t_post);
        for i in 0..n {
            delta_t[i].push(t_post - (s.pre_times[i] + delays[i]));
            delay_hist[i].push(delays[i]);
        }
        if rep == reps || frozen_at.is_some() {
            continue;
        }
        for i in 0..n {
            delays[i] += delay_rule(delta_t[i][rep], s.b_minus, s.b_plus, s.sigma_minus, s.sigma_plus) + s.growth;
        }
        if let Some(c) = s.freeze_c {
            if delays.iter().any(|&d| d < c) {
                frozen_at = Some(rep + 1);
            }
        }
    }
    // Repetitions whose update was actually applied.
    let learning_steps = frozen_at.unwrap_or(reps);

    let contributors: Vec<usize> = (0..n).filter(|&i| s.contributes[i]).collect();
    let late: Vec<usize> = (0..n).filter(|&i| !s.contributes[i]).collect();
    let converged_at = (0..=reps).find(|&r| contributors.iter().all(|&i| delta_t[i][r] < CONVERGENCE_TOL));

    let mut checks = Vec::with_capacity(LemmaCheck::ALL.len());
    let predicted_convergence;
    if !s.premise_holds() {
        predicted_convergence = None;
        let why = format!("premise 0 < B- <= sigma- not met (B- = {}, sigma- = {})", s.b_minus, s.sigma_minus);
        for check in LemmaCheck::ALL {
            checks.push((check, Status::Skipped(why.clone())));
        }
    } else {
        let mut predicted = Some(0);
        for &i in &contributors {
            let p = recurrence_iterations(delta_t[i][0].max(0.0), s.b_minus, s.sigma_minus, CONVERGENCE_TOL, 100_000)?;
            predicted = match (predicted, p) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            };
        }
        predicted_convergence = predicted;

        checks.push((LemmaCheck::Positivity, check_positivity(s, &contributors, &delta_t, learning_steps)));
        checks.push((LemmaCheck::LastStaysLast, check_last_stays_last(&contributors, &delta_t)));
        checks.push((LemmaCheck::FiringShift, check_firing_shift(s, &post_times, learning_steps)));
        checks.push((LemmaCheck::Monotone, check_monotone(&contributors, &delta_t)));
        checks.push((
            LemmaCheck::Convergence,
            check_convergence(converged_at, predicted_convergence, frozen_at),
        ));
        checks.push((LemmaCheck::Repulsion, check_repulsion(s, &late, &delta_t, learning_steps)));
    }

    Ok(LemmaReport {
        checks,
        post_times,
        delta_t,
        delays: delay_hist,
        converged_at,
        predicted_convergence,
        frozen_at,
    })
}

fn check_positivity(s: &LemmaScenario, contributors: &[usize], delta_t: &[Vec<f64>], steps: usize) -> Status {
    for &i in contributors {
        for r in 0..steps {
            let dt = delta_t[i][r];
            if dt < -IDENTITY_TOL {
                return Status::Fail(format!("input {i}: contributing timing {dt} < 0 at repetition {r}"));
            }
            let dt = dt.max(0.0);
            let change = -s.b_minus * (-dt / s.sigma_minus).exp_m1();
            if change > dt + IDENTITY_TOL {
                return Status::Fail(format!("input {i}: delay decrease {change} exceeds timing {dt} at repetition {r}"));
            }
            if delta_t[i][r + 1] < -IDENTITY_TOL {
                return Status::Fail(format!("input {i}: timing became {} after repetition {r}", delta_t[i][r + 1]));
            }
        }
    }
    Status::Pass
}

fn check_last_stays_last(contributors: &[usize], delta_t: &[Vec<f64>]) -> Status {
    let last = contributors
        .iter()
        .copied()
        .min_by(|&a, &b| delta_t[a][0].total_cmp(&delta_t[b][0]))
        .expect("validated: at least one contributor");
    match delta_t[last].iter().position(|dt| dt.abs() > IDENTITY_TOL) {
        None => Status::Pass,
        Some(r) => Status::Fail(format!("last input {last} has timing {} at repetition {r}", delta_t[last][r])),
    }
}

fn check_firing_shift(s: &LemmaScenario, post_times: &[TimePoint], steps: usize) -> Status {
    let expected = -s.b_minus + s.growth;
    for r in 0..steps {
        let shift = post_times[r + 1] - post_times[r];
        if (shift - expected).abs() > IDENTITY_TOL {
            return Status::Fail(format!("post spike moved by {shift} at repetition {r}, expected {expected}"));
        }
    }
    Status::Pass
}

fn check_monotone(contributors: &[usize], delta_t: &[Vec<f64>]) -> Status {
    for &i in contributors {
        for (r, w) in delta_t[i].windows(2).enumerate() {
            if w[1] > w[0] + IDENTITY_TOL || w[1] < -IDENTITY_TOL {
                return Status::Fail(format!("input {i}: timing went {} -> {} at repetition {r}", w[0], w[1]));
            }
        }
    }
    Status::Pass
}

fn check_convergence(converged_at: Option<usize>, predicted: Option<usize>, frozen_at: Option<usize>) -> Status {
    match (converged_at, predicted) {
        (Some(got), Some(want)) if got.abs_diff(want) <= 1 => Status::Pass,
        (Some(got), Some(want)) => Status::Fail(format!("converged after {got} repetitions, recurrence predicts {want}")),
        (Some(got), None) => Status::Fail(format!("converged after {got} repetitions, recurrence did not converge")),
        (None, _) if frozen_at.is_some() => Status::Skipped("learning stopped by the freeze condition".into()),
        (None, Some(want)) => Status::Fail(format!("not converged; recurrence predicts {want} repetitions")),
        (None, None) => Status::Skipped("more repetitions needed than simulated".into()),
    }
}

fn check_repulsion(s: &LemmaScenario, late: &[usize], delta_t: &[Vec<f64>], steps: usize) -> Status {
    if late.is_empty() {
        return Status::Skipped("no input arrives after the post spike".into());
    }
    for &i in late {
        for r in 0..steps {
            let (old, new) = (delta_t[i][r], delta_t[i][r + 1]);
            let expected = -s.b_minus - s.b_plus * (old / s.sigma_plus).exp();
            if !(new < old) || ((new - old) - expected).abs() > IDENTITY_TOL {
                return Status::Fail(format!(
                    "input {i}: timing {old} -> {new} at repetition {r}, expected change {expected}"
                ));
            }
        }
    }
    Status::Pass
}

/// Random premise-satisfying scenario: 2 to 8 contributing inputs, up to 2 late
/// ones, `sigma-` in `[1, 5)` and `B- / sigma-` in `[0.3, 1]`.
pub fn random_scenario(rng: &mut RngStream, repetitions: usize) -> LemmaScenario {
    let contributing = 2 + rng.below(7);
    let late = rng.below(3);
    let sigma_minus = rng.uniform(1.0, 5.0);
    let b_minus = sigma_minus * rng.uniform(0.3, 1.0 + f64::EPSILON).min(1.0);
    let mut pre_times: Vec<f64> = (0..contributing).map(|_| rng.uniform(0.0, 10.0)).collect();
    let mut initial_delays: Vec<f64> = (0..contributing).map(|_| rng.uniform(20.0, 30.0)).collect();
    let t_post = pre_times
        .iter()
        .zip(&initial_delays)
        .map(|(t, d)| t + d)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut contributes = vec![true; contributing];
    for _ in 0..late {
        let t = rng.uniform(0.0, 10.0);
        let arrival = t_post + rng.uniform(0.5, 5.0);
        pre_times.push(t);
        initial_delays.push(arrival - t);
        contributes.push(false);
    }
    LemmaScenario {
        pre_times,
        initial_delays,
        contributes,
        b_minus,
        b_plus: rng.uniform(0.1, 2.0),
        sigma_minus,
        sigma_plus: rng.uniform(0.5, 5.0),
        repetitions,
        growth: 0.0,
        freeze_c: None,
    }
}

/// `count` random scenarios; scenario `i` uses its own substream of `seed`.
pub fn random_scenarios(seed: u64, count: usize, repetitions: usize) -> Vec<LemmaScenario> {
    (0..count)
        .map(|i| random_scenario(&mut RngStream::substream(seed, StreamId::Scenario, i as u32), repetitions))
        .collect()
}

pub fn run_lemma_batch(scenarios: &[LemmaScenario], exec: Exec) -> Vec<Result<LemmaReport>> {
    par::map_indexed(exec, scenarios, |_, s| run_lemma_suite(s))
}

/// Result of sampling the positivity inequality `B- (1 - exp(-dt/sigma-)) <= dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySample {
    pub samples: usize,
    pub violations: usize,
    /// Largest `lhs - dt` seen, in units of the allowed slack.
    pub worst_ratio: f64,
}

/// Sample `(B-, sigma-, dt)` with `0 < B- <= sigma-` and `dt` in `[0, 100]`
/// and count violations beyond `eps_slack` machine epsilons (relative).
pub fn sample_positivity_inequality(seed: u64, samples: usize, eps_slack: f64, exec: Exec) -> InequalitySample {
    const CHUNK: usize = 1024;
    let chunks = samples.div_ceil(CHUNK);
    let parts = par::map_range(exec, chunks, |c| {
        let mut rng = RngStream::substream(seed, StreamId::Scenario, u32::MAX - c as u32);
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..CHUNK.min(samples - c * CHUNK) {
            let sigma = rng.uniform(1e-3, 10.0);
            let b = sigma * (1.0 - rng.uniform(0.0, 1.0));
            let dt = rng.uniform(0.0, 100.0);
            let lhs = -b * (-dt / sigma).exp_m1();
            let slack = eps_slack * f64::EPSILON * dt.max(lhs).max(f64::MIN_POSITIVE);
            let ratio = (lhs - dt) / slack;
            worst = worst.max(ratio);
            if lhs > dt + slack {
                violations += 1;
            }
        }
        (violations, worst)
    });
    InequalitySample {
        samples,
        violations: parts.iter().map(|p| p.0).sum(),
        worst_ratio: parts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    }
}
