//! Input grid feeding a convolutional layer of feature maps that share one
//! 5x5 kernel of weights and delays each.
//!
//! A stimulus is simulated event by event: input spikes are injected through
//! the queue, each one schedules an arrival at `t + delay` on every output
//! neuron whose window covers it, and arrivals are delivered at their exact
//! times. Leak, membrane noise and a threshold test are additionally applied
//! on the fixed `dt` grid. A feature neuron that fires silences the neurons of
//! the other maps at its location until the stimulus ends. All learning runs
//! in [`Network::finish_stimulus`], after the stimulus.

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::dataset::{Dataset, Stimulus};
use crate::error::{Error, Result};
use crate::neuron::{self, NeuronState};
use crate::plasticity::{self, PairSample, PairTiming, PlasticityReport, RateEstimate};
use crate::queue::{SpikeEvent, SpikeQueue};
use crate::rng::{RngStream, StreamId};
use crate::types::{cell_index, Kernel, NeuronId, SynapseParams, TimePoint, KERNEL, KERNEL_CELLS};

pub use crate::types::KERNEL as KERNEL_SIZE;

/// Number of feature maps.
pub const FEATURES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub grid_height: usize,
    pub grid_width: usize,
    pub features: usize,
}

impl Topology {
    pub fn new(grid_height: usize, grid_width: usize) -> Result<Self> {
        if grid_height < KERNEL || grid_width < KERNEL {
            return Err(Error::validation(
                "grid",
                format!("{grid_height}x{grid_width} is smaller than the {KERNEL}x{KERNEL} kernel"),
            ));
        }
        Ok(Topology {
            grid_height,
            grid_width,
            features: FEATURES,
        })
    }

    pub fn out_height(&self) -> usize {
        self.grid_height - KERNEL + 1
    }

    pub fn out_width(&self) -> usize {
        self.grid_width - KERNEL + 1
    }

    pub fn inputs(&self) -> usize {
        self.grid_height * self.grid_width
    }

    pub fn outputs_per_feature(&self) -> usize {
        self.out_height() * self.out_width()
    }

    pub fn outputs(&self) -> usize {
        self.features * self.outputs_per_feature()
    }

    pub fn input_id(&self, x: usize, y: usize) -> NeuronId {
        NeuronId((y * self.grid_width + x) as u32)
    }

    pub fn input_coords(&self, id: NeuronId) -> Option<(usize, usize)> {
        let i = id.index();
        (i < self.inputs()).then(|| (i % self.grid_width, i / self.grid_width))
    }

    /// Index into the output-neuron array.
    pub fn output_index(&self, feature: usize, y: usize, x: usize) -> usize {
        feature * self.outputs_per_feature() + y * self.out_width() + x
    }

    pub fn output_id(&self, feature: usize, y: usize, x: usize) -> NeuronId {
        NeuronId((self.inputs() + self.output_index(feature, y, x)) as u32)
    }

    /// `(feature, y, x)` of an output-neuron index.
    pub fn output_coords(&self, index: usize) -> (usize, usize, usize) {
        let per = self.outputs_per_feature();
        let rem = index % per;
        (index / per, rem / self.out_width(), rem % self.out_width())
    }

    /// Every `(oy, ox, kernel cell)` whose window contains input `(x, y)`.
    pub fn windows_containing(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let ys = y.saturating_sub(KERNEL - 1)..=y.min(self.out_height() - 1);
        ys.flat_map(move |oy| {
            let xs = x.saturating_sub(KERNEL - 1)..=x.min(self.out_width() - 1);
            xs.map(move |ox| (oy, ox, cell_index(y - oy, x - ox)))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureFiring {
    pub feature: usize,
    pub y: usize,
    pub x: usize,
    pub time: TimePoint,
}

/// Every spike of one stimulus, in firing order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActivityRecord {
    pub input_firings: Vec<(NeuronId, TimePoint)>,
    pub feature_firings: Vec<FeatureFiring>,
    /// Arrivals scheduled past the stimulus window and dropped.
    pub dropped_events: usize,
}

impl ActivityRecord {
    pub fn firings_per_feature(&self, features: usize) -> Vec<usize> {
        let mut counts = vec![0; features];
        for f in &self.feature_firings {
            counts[f.feature] += 1;
        }
        counts
    }
}

/// Event-driven simulation of one stimulus over `neurons`, which must be at
/// rest. Does not touch any learned parameter.
fn simulate(
    topology: &Topology,
    kernels: &[Kernel],
    cfg: &SimConfig,
    stim: &Stimulus,
    neurons: &mut [NeuronState],
    noise: &mut RngStream,
) -> Result<ActivityRecord> {
    let window = cfg.stimulus_window;
    let tau = cfg.tau_m;
    let mut record = ActivityRecord::default();
    let mut queue = SpikeQueue::with_capacity(stim.spikes.len() * FEATURES * KERNEL_CELLS);
    for sp in &stim.spikes {
        let (x, y) = (sp.x as usize, sp.y as usize);
        if x >= topology.grid_width || y >= topology.grid_height {
            return Err(Error::Structural(format!(
                "stimulus {} has spike at ({x}, {y}) outside the {}x{} grid",
                stim.id, topology.grid_height, topology.grid_width
            )));
        }
        let t = sp.t as TimePoint;
        if t > window {
            record.dropped_events += 1;
            continue;
        }
        queue.push(SpikeEvent::injection(topology.input_id(x, y), t));
    }

    let mut input_fired = vec![false; topology.inputs()];
    let per_feature = topology.outputs_per_feature();
    let out_w = topology.out_width();
    let steps = (window / cfg.dt).ceil() as usize;

    let fire = |neurons: &mut [NeuronState], record: &mut ActivityRecord, index: usize, time: TimePoint| {
        let (feature, y, x) = topology.output_coords(index);
        record.feature_firings.push(FeatureFiring { feature, y, x, time });
        let loc = y * out_w + x;
        for other in (0..topology.features).filter(|&g| g != feature) {
            let n = &mut neurons[other * per_feature + loc];
            if n.fired_at.is_none() {
                n.inhibited = true;
            }
        }
    };

    let mut t_start = 0.0;
    for k in 0..steps {
        let t_end = if k + 1 == steps { window } else { (k + 1) as f64 * cfg.dt };
        while let Some(ev) = queue.pop_until(t_end) {
            if let Some((x, y)) = topology.input_coords(ev.target) {
                if std::mem::replace(&mut input_fired[ev.target.index()], true) {
                    continue; // first-spike coding on the input layer too
                }
                record.input_firings.push((ev.target, ev.arrival));
                for (oy, ox, cell) in topology.windows_containing(x, y) {
                    for (f, kernel) in kernels.iter().enumerate() {
                        let target = topology.output_id(f, oy, ox);
                        let spike = SpikeEvent::synaptic(ev.target, target, ev.arrival, kernel[cell].delay);
                        if spike.arrival > window {
                            record.dropped_events += 1;
                        } else {
                            queue.push(spike);
                        }
                    }
                }
            } else {
                let index = ev.target.index() - topology.inputs();
                let (f, oy, ox) = topology.output_coords(index);
                let (sx, sy) = topology
                    .input_coords(ev.source)
                    .ok_or_else(|| Error::Structural(format!("synaptic event from non-input {:?}", ev.source)))?;
                let weight = kernels[f][cell_index(sy - oy, sx - ox)].weight;
                if neurons[index].receive(ev.arrival, weight, tau) {
                    fire(neurons, &mut record, index, ev.arrival);
                }
            }
        }

        let step_decay = (-(t_end - t_start) / tau).exp();
        for index in 0..neurons.len() {
            let n = &mut neurons[index];
            if !n.is_active() {
                continue;
            }
            if n.updated_at == t_start {
                n.potential *= step_decay;
                n.updated_at = t_end;
            } else {
                n.leak_to(t_end, tau);
            }
            n.potential += noise.gaussian_unchecked(0.0, cfg.noise_std);
            let (next, fired) = neuron::check_fire(*n, t_end);
            *n = next;
            if fired {
                fire(neurons, &mut record, index, t_end);
            }
        }
        t_start = t_end;
    }
    Ok(record)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub stimuli_presented: usize,
    pub dropped_events: usize,
}

/// Per-stimulus callback payload for [`Network::train_with`].
pub enum TrainEvent<'a> {
    StimulusDone {
        epoch: usize,
        index: usize,
        record: &'a ActivityRecord,
        report: &'a PlasticityReport,
        network: &'a Network,
    },
    EpochDone {
        epoch: usize,
        network: &'a Network,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub max_epochs: usize,
    pub all_frozen: bool,
    /// Epoch (1-based) in which each feature froze.
    pub freeze_epochs: Vec<Option<usize>>,
    pub stimuli_presented: usize,
    pub dropped_events: usize,
    /// Firings per feature, summed over each epoch.
    pub firings_per_epoch: Vec<Vec<usize>>,
    /// `[feature][ky][kx]`.
    pub weights: Vec<[[f64; KERNEL]; KERNEL]>,
    pub delays: Vec<[[f64; KERNEL]; KERNEL]>,
}

#[derive(Debug, Clone)]
pub struct Network {
    cfg: SimConfig,
    topology: Topology,
    kernels: Vec<Kernel>,
    neurons: Vec<NeuronState>,
    frozen: Vec<bool>,
    freeze_epoch: Vec<Option<usize>>,
    rates: Vec<RateEstimate>,
    noise: RngStream,
    stats: RunStats,
    epoch: usize,
}

impl Network {
    /// Fresh network with random initial weights and delays from `cfg.rng_seed`.
    pub fn build(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.rng_seed;
        let mut wrng = RngStream::new(seed, StreamId::WeightInit);
        let mut drng = RngStream::new(seed, StreamId::DelayInit);
        let delay_floor = cfg.freeze_c + cfg.b_minus * cfg.dt;
        let mut kernels = Vec::with_capacity(FEATURES);
        for _ in 0..FEATURES {
            let mut k = [SynapseParams::new(0.0, 0.0); KERNEL_CELLS];
            for syn in k.iter_mut() {
                syn.weight = wrng
                    .gaussian(cfg.weight_init_mean, cfg.weight_init_std)?
                    .clamp(cfg.w_min, cfg.w_max);
                syn.delay = drng.gaussian(cfg.delay_init_mean, cfg.delay_init_spread)?.max(delay_floor);
            }
            kernels.push(k);
        }
        Self::from_kernels(cfg, kernels)
    }

    /// Network with the given kernels and nothing frozen.
    pub fn from_kernels(cfg: &SimConfig, kernels: Vec<Kernel>) -> Result<Self> {
        cfg.validate()?;
        let topology = Topology::new(cfg.grid_height, cfg.grid_width)?;
        if kernels.len() != topology.features {
            return Err(Error::Structural(format!(
                "expected {} kernels, got {}",
                topology.features,
                kernels.len()
            )));
        }
        if kernels.iter().flatten().any(|s| !(s.delay > 0.0) || !s.weight.is_finite()) {
            return Err(Error::Structural("kernel delays must be > 0 and weights finite".into()));
        }
        Ok(Network {
            neurons: vec![NeuronState::new(cfg.threshold); topology.outputs()],
            frozen: vec![false; topology.features],
            freeze_epoch: vec![None; topology.features],
            rates: vec![RateEstimate::new(cfg.rate_ema_decay); topology.features],
            noise: RngStream::new(cfg.rng_seed, StreamId::MembraneNoise),
            stats: RunStats::default(),
            epoch: 0,
            cfg: cfg.clone(),
            topology,
            kernels,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn neurons(&self) -> &[NeuronState] {
        &self.neurons
    }

    pub fn neurons_mut(&mut self) -> &mut [NeuronState] {
        &mut self.neurons
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn all_frozen(&self) -> bool {
        self.frozen.iter().all(|&f| f)
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    /// Output neuron state at `(feature, y, x)`.
    pub fn neuron(&self, feature: usize, y: usize, x: usize) -> &NeuronState {
        &self.neurons[self.topology.output_index(feature, y, x)]
    }

    /// Present one stimulus with membrane noise from the network's own stream.
    /// Neurons are brought to rest first. No learning happens here.
    pub fn present_stimulus(&mut self, stim: &Stimulus) -> Result<ActivityRecord> {
        for n in self.neurons.iter_mut() {
            *n = neuron::reset(*n);
        }
        let record = simulate(&self.topology, &self.kernels, &self.cfg, stim, &mut self.neurons, &mut self.noise)?;
        self.stats.stimuli_presented += 1;
        self.stats.dropped_events += record.dropped_events;
        Ok(record)
    }

    /// Simulate `stim` on a scratch copy of the neurons (current thresholds,
    /// at rest) with the given noise stream. The network is not modified.
    pub fn simulate_detached(&self, stim: &Stimulus, noise: &mut RngStream) -> Result<ActivityRecord> {
        let mut neurons: Vec<NeuronState> = self.neurons.iter().map(|n| neuron::reset(*n)).collect();
        simulate(&self.topology, &self.kernels, &self.cfg, stim, &mut neurons, noise)
    }

    fn pair_samples(&self, record: &ActivityRecord) -> Result<Vec<PairSample>> {
        let topo = &self.topology;
        let mut fired_at: Vec<Option<TimePoint>> = vec![None; topo.inputs()];
        for &(id, t) in &record.input_firings {
            let slot = fired_at
                .get_mut(id.index())
                .ok_or_else(|| Error::Structural(format!("record references unknown input {id:?}")))?;
            *slot = Some(t);
        }
        let mut pairs = Vec::new();
        for ff in &record.feature_firings {
            if ff.feature >= topo.features || ff.y >= topo.out_height() || ff.x >= topo.out_width() {
                return Err(Error::Structural(format!("record references unknown neuron {ff:?}")));
            }
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let id = topo.input_id(ff.x + kx, ff.y + ky);
                    if let Some(t_pre) = fired_at[id.index()] {
                        let cell = cell_index(ky, kx);
                        let delay = self.kernels[ff.feature][cell].delay;
                        pairs.push(PairSample {
                            feature: ff.feature,
                            cell,
                            timing: PairTiming::new(t_pre, ff.time, delay),
                        });
                    }
                }
            }
        }
        Ok(pairs)
    }

    /// End-of-stimulus learning, in order: pair updates, homeostasis, growth,
    /// threshold adaptation, reset. The freeze check runs after each of the
    /// first three.
    pub fn finish_stimulus(&mut self, record: &ActivityRecord) -> Result<PlasticityReport> {
        let before = self.kernels.clone();
        let pairs = self.pair_samples(record)?;
        let mut report = plasticity::apply_pair_updates(&pairs, &mut self.kernels, &self.frozen, &self.cfg)?;

        // The stop condition is evaluated after every step that can lower a
        // delay, so a delay pushed below `freeze_c` is never lifted back.
        self.check_freeze(&mut report)?;

        let counts = record.firings_per_feature(self.topology.features);
        for (f, &count) in counts.iter().enumerate() {
            let rate = self.rates[f].observe(count as f64);
            let k = plasticity::homeostasis_factor(self.cfg.r_target, rate)?;
            plasticity::apply_homeostasis(&mut self.kernels[f], k, self.frozen[f], &self.cfg);
        }
        self.check_freeze(&mut report)?;

        let growth = self.cfg.growth_factor * self.cfg.stimulus_window;
        for f in 0..self.topology.features {
            if !self.frozen[f] {
                plasticity::apply_growth(&mut self.kernels[f], growth);
            }
        }
        self.check_freeze(&mut report)?;

        for n in self.neurons.iter_mut() {
            let fired = n.fired_at.is_some();
            *n = neuron::adapt_threshold(
                *n,
                fired,
                self.cfg.threshold_adapt_up,
                self.cfg.threshold_adapt_down,
                self.cfg.threshold_min,
            );
            *n = neuron::reset(*n);
        }

        for (f, (after, prev)) in self.kernels.iter().zip(&before).enumerate() {
            for c in 0..KERNEL_CELLS {
                report.weight_deltas[f][c] = after[c].weight - prev[c].weight;
                report.delay_deltas[f][c] = after[c].delay - prev[c].delay;
            }
        }
        report.frozen_features = plasticity::frozen_set(&self.frozen);
        Ok(report)
    }

    fn check_freeze(&mut self, report: &mut PlasticityReport) -> Result<()> {
        for f in 0..self.topology.features {
            if self.frozen[f] {
                continue;
            }
            let delays: Vec<f64> = self.kernels[f].iter().map(|s| s.delay).collect();
            if plasticity::check_freeze(&delays, self.cfg.freeze_c)? {
                self.frozen[f] = true;
                self.freeze_epoch[f] = Some(self.epoch.max(1));
                report.newly_frozen.insert(f);
            }
        }
        Ok(())
    }

    /// Train until every feature is frozen or `max_epochs` have run.
    pub fn train(&mut self, ds: &Dataset, max_epochs: usize) -> Result<TrainingSummary> {
        self.train_with(ds, max_epochs, |_| {})
    }

    /// [`Network::train`] with a callback after every stimulus and epoch.
    pub fn train_with<F>(&mut self, ds: &Dataset, max_epochs: usize, mut observer: F) -> Result<TrainingSummary>
    where
        F: FnMut(TrainEvent<'_>),
    {
        if max_epochs == 0 {
            return Err(Error::validation("max_epochs", "must be >= 1"));
        }
        if !ds.is_empty() && (ds.grid_height != self.topology.grid_height || ds.grid_width != self.topology.grid_width) {
            return Err(Error::validation(
                "grid",
                format!(
                    "dataset grid {}x{} does not match network grid {}x{}",
                    ds.grid_height, ds.grid_width, self.topology.grid_height, self.topology.grid_width
                ),
            ));
        }
        let mut firings_per_epoch = Vec::new();
        let mut epochs_run = 0;
        for epoch in 1..=max_epochs {
            self.epoch = epoch;
            let mut firings = vec![0; self.topology.features];
            for (index, stim) in ds.stimuli.iter().enumerate() {
                let record = self.present_stimulus(stim)?;
                for (acc, c) in firings.iter_mut().zip(record.firings_per_feature(self.topology.features)) {
                    *acc += c;
                }
                let report = self.finish_stimulus(&record)?;
                observer(TrainEvent::StimulusDone {
                    epoch,
                    index,
                    record: &record,
                    report: &report,
                    network: self,
                });
            }
            firings_per_epoch.push(firings);
            epochs_run = epoch;
            observer(TrainEvent::EpochDone { epoch, network: self });
            log::debug!("epoch {epoch}: frozen {:?}", self.frozen);
            if self.all_frozen() {
                break;
            }
        }
        Ok(TrainingSummary {
            epochs_run,
            max_epochs,
            all_frozen: self.all_frozen(),
            freeze_epochs: self.freeze_epoch.clone(),
            stimuli_presented: self.stats.stimuli_presented,
            dropped_events: self.stats.dropped_events,
            firings_per_epoch,
            weights: self.kernels.iter().map(|k| grid_of(k, |s| s.weight)).collect(),
            delays: self.kernels.iter().map(|k| grid_of(k, |s| s.delay)).collect(),
        })
    }
}

/// Reshape one kernel field into `[ky][kx]`.
pub fn grid_of(kernel: &Kernel, field: impl Fn(&SynapseParams) -> f64) -> [[f64; KERNEL]; KERNEL] {
    let mut out = [[0.0; KERNEL]; KERNEL];
    for ky in 0..KERNEL {
        for kx in 0..KERNEL {
            out[ky][kx] = field(&kernel[cell_index(ky, kx)]);
        }
    }
    out
}

/// Convenience for [`Network::build`].
pub fn build_network(cfg: &SimConfig) -> Result<Network> {
    Network::build(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Direction, InputSpike};

    fn quiet(h: usize, w: usize) -> SimConfig {
        SimConfig {
            grid_height: h,
            grid_width: w,
            noise_std: 0.0,
            ..SimConfig::default()
        }
    }

    fn uniform(weight: f64, delay: f64) -> Kernel {
        [SynapseParams::new(weight, delay); KERNEL_CELLS]
    }

    fn full_window_at_zero() -> Stimulus {
        let spikes = (0..5u16)
            .flat_map(|y| (0..5u16).map(move |x| InputSpike { x, y, t: 0, coherent: true }))
            .collect();
        Stimulus {
            id: 0,
            direction: Direction::Deg45,
            spikes,
        }
    }

    fn empty_stimulus() -> Stimulus {
        Stimulus {
            id: 0,
            direction: Direction::Deg45,
            spikes: vec![],
        }
    }

    #[test]
    fn shapes() {
        let net = Network::build(&SimConfig::default()).unwrap();
        let t = net.topology();
        assert_eq!((t.features, t.out_height(), t.out_width()), (4, 11, 11));
        assert_eq!(net.kernels().iter().map(|k| k.len()).sum::<usize>(), 100);
        assert_eq!(net.neurons().len(), 4 * 121);

        let t = Topology::new(5, 5).unwrap();
        assert_eq!((t.out_height(), t.out_width()), (1, 1));
        assert!(matches!(Topology::new(4, 9), Err(Error::Validation { .. })));
    }

    #[test]
    fn windows_containing_matches_brute_force() {
        let t = Topology::new(7, 9).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let got: Vec<_> = t.windows_containing(x, y).collect();
                let mut want = vec![];
                for oy in 0..t.out_height() {
                    for ox in 0..t.out_width() {
                        if (oy..oy + KERNEL).contains(&y) && (ox..ox + KERNEL).contains(&x) {
                            want.push((oy, ox, cell_index(y - oy, x - ox)));
                        }
                    }
                }
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn empty_stimulus_is_silent() {
        let mut net = Network::build(&quiet(15, 15)).unwrap();
        let rec = net.present_stimulus(&empty_stimulus()).unwrap();
        assert_eq!(rec, ActivityRecord::default());
    }

    #[test]
    fn full_window_fires_when_arrivals_land() {
        let cfg = quiet(5, 5);
        let d = 10.0;
        let mut net = Network::from_kernels(&cfg, vec![uniform(0.95, d); 4]).unwrap();
        let rec = net.present_stimulus(&full_window_at_zero()).unwrap();
        assert_eq!(rec.input_firings.len(), 25);
        assert_eq!(rec.feature_firings.len(), 1, "{:?}", rec.feature_firings);
        let f = rec.feature_firings[0];
        assert_eq!((f.feature, f.y, f.x), (0, 0, 0));
        assert_eq!(f.time, d);
        assert!(net.neuron(1, 0, 0).inhibited);
    }

    #[test]
    fn earliest_map_inhibits_the_others() {
        let cfg = quiet(5, 5);
        let mut kernels = vec![uniform(0.95, 10.0); 4];
        kernels[2] = uniform(0.95, 5.0);
        let mut net = Network::from_kernels(&cfg, kernels).unwrap();
        let rec = net.present_stimulus(&full_window_at_zero()).unwrap();
        let fired: Vec<_> = rec.feature_firings.iter().map(|f| (f.feature, f.time)).collect();
        assert_eq!(fired, vec![(2, 5.0)]);
        for f in [0, 1, 3] {
            assert!(net.neuron(f, 0, 0).inhibited);
            assert!(net.neuron(f, 0, 0).fired_at.is_none());
        }
    }

    #[test]
    fn late_arrivals_are_dropped() {
        let cfg = quiet(5, 5);
        let mut net = Network::from_kernels(&cfg, vec![uniform(0.95, cfg.stimulus_window + 1.0); 4]).unwrap();
        let rec = net.present_stimulus(&full_window_at_zero()).unwrap();
        assert!(rec.feature_firings.is_empty());
        assert_eq!(rec.dropped_events, 25 * 4);
    }

    #[test]
    fn detached_simulation_leaves_network_untouched() {
        let cfg = SimConfig::default();
        let net = Network::build(&cfg).unwrap();
        let ds = crate::dataset::generate_dataset(&cfg, 3);
        let before = net.clone();
        let mut noise = RngStream::new(1, StreamId::Measurement);
        net.simulate_detached(&ds.stimuli[0], &mut noise).unwrap();
        assert_eq!(before.kernels(), net.kernels());
        assert_eq!(before.neurons(), net.neurons());
    }

    #[test]
    fn floored_delay_freezes_before_homeostasis_can_lift_it() {
        let cfg = SimConfig {
            r_target: 0.01,
            ..quiet(5, 5)
        };
        let mut net = Network::from_kernels(&cfg, vec![uniform(0.5, 3.0); 4]).unwrap();
        let topo = *net.topology();
        let record = ActivityRecord {
            input_firings: vec![(topo.input_id(0, 0), 0.0)],
            feature_firings: vec![FeatureFiring {
                feature: 0,
                y: 0,
                x: 0,
                time: 3.0,
            }],
            dropped_events: 0,
        };
        let report = net.finish_stimulus(&record).unwrap();
        assert!(net.frozen()[0]);
        assert!(report.newly_frozen.contains(&0));
        assert_eq!(net.kernels()[0][0].delay, cfg.delay_min);
        assert_eq!(net.kernels()[0][1].delay, 3.0, "frozen delays ignore homeostasis and growth");
        let moved = 3.0 - cfg.lambda_d + cfg.growth_factor * cfg.stimulus_window;
        assert!((net.kernels()[1][0].delay - moved).abs() < 1e-12);
        // potentiated to w_max, then homeostasis of an over-active map
        let rate = RateEstimate::new(cfg.rate_ema_decay).observe(1.0);
        let k = (cfg.r_target - rate) / cfg.r_target;
        assert!((net.kernels()[0][0].weight - (cfg.w_max + cfg.lambda_w * k)).abs() < 1e-12);
        assert!(!net.frozen()[1]);
    }

    #[test]
    fn silent_stimulus_update() {
        let cfg = quiet(5, 5);
        let mut net = Network::from_kernels(&cfg, vec![uniform(0.5, 50.0); 4]).unwrap();
        let report = net.finish_stimulus(&ActivityRecord::default()).unwrap();
        // rate estimate 0, so K = 1
        let want_d = 50.0 - cfg.lambda_d + cfg.growth_factor * cfg.stimulus_window;
        let want_w = 0.5 + cfg.lambda_w;
        for k in net.kernels() {
            for s in k {
                assert!((s.delay - want_d).abs() < 1e-12);
                assert!((s.weight - want_w).abs() < 1e-12);
            }
        }
        assert!((report.delay_deltas[0][0] - (want_d - 50.0)).abs() < 1e-12);
        assert!((net.neuron(0, 0, 0).threshold - (cfg.threshold - cfg.threshold_adapt_down)).abs() < 1e-12);
    }

    #[test]
    fn zero_epochs_and_grid_mismatch_are_errors() {
        let cfg = SimConfig::default();
        let ds = crate::dataset::generate_dataset(&cfg, 1);
        let mut net = Network::build(&cfg).unwrap();
        assert!(matches!(net.train(&ds, 0), Err(Error::Validation { .. })));
        let mut small = Network::build(&quiet(9, 9)).unwrap();
        assert!(matches!(small.train(&ds, 1), Err(Error::Validation { .. })));
    }

    #[test]
    fn empty_stimuli_never_freeze() {
        let cfg = quiet(15, 15);
        let ds = Dataset {
            grid_height: 15,
            grid_width: 15,
            stimuli: vec![empty_stimulus(); 3],
        };
        let mut net = Network::build(&cfg).unwrap();
        let summary = net.train(&ds, 5).unwrap();
        assert_eq!(summary.epochs_run, 5);
        assert!(!summary.all_frozen);
        assert_eq!(summary.freeze_epochs, vec![None; 4]);
        assert_eq!(summary.firings_per_epoch, vec![vec![0; 4]; 5]);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = SimConfig::default();
        let ds = crate::dataset::generate_dataset(&cfg, 7);
        let run = || {
            let mut net = Network::build(&cfg).unwrap();
            let s = net.train(&ds, 1).unwrap();
            serde_json::to_string(&s).unwrap()
        };
        assert_eq!(run(), run());
    }
}
