//! Modified backpropagation with an adaptive ("bold driver") learning rate.
//!
//! Training minimizes `½ Σ (d − y)²` per pattern with one weight update per
//! pattern. The reported error is the percentage measure
//! `E = 100 (o_max − o_min) / (T n) Σ_t Σ_i (d_i(t) − y_i(t))²`,
//! see [`error_percentage`].
//!
//! While training, every per-pattern update proposal `δ = −η ∂L/∂w` is
//! accumulated for every feedforward-legal pair of active nodes, including
//! pairs that are not connected. [`connection_significance`] turns these
//! statistics into the importance `|w + mean δ| / sd δ`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{config, Error, Result};
use crate::network::{ActivationTrace, Network, BIAS_SOURCE};

/// Input/target pairs plus the output range used by the error measure.
#[derive(Clone, Debug, PartialEq)]
pub struct PatternSet {
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    o_min: f64,
    o_max: f64,
}

impl PatternSet {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>, o_min: f64, o_max: f64) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyPatterns("pattern set has no patterns"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::Dimension {
                context: "target count",
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        if !(o_max >= o_min) {
            return Err(config(format!("o_max {o_max} < o_min {o_min}")));
        }
        let m = inputs[0].len();
        let n = targets[0].len();
        for (x, d) in inputs.iter().zip(&targets) {
            if x.len() != m {
                return Err(Error::Dimension { context: "pattern input", expected: m, found: x.len() });
            }
            if d.len() != n {
                return Err(Error::Dimension { context: "pattern target", expected: n, found: d.len() });
            }
            if d.iter().any(|&v| v < o_min || v > o_max) {
                return Err(config("target outside [o_min, o_max]"));
            }
        }
        Ok(Self { inputs, targets, o_min, o_max })
    }

    /// Pattern count `T`.
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.targets[0].len()
    }

    pub fn o_min(&self) -> f64 {
        self.o_min
    }

    pub fn o_max(&self) -> f64 {
        self.o_max
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.inputs.iter().map(Vec::as_slice).zip(self.targets.iter().map(Vec::as_slice))
    }

    /// Concatenation of two sets with the same dimensions and output range.
    pub fn concat(&self, other: &PatternSet) -> Result<PatternSet> {
        if self.input_dim() != other.input_dim() || self.output_dim() != other.output_dim() {
            return Err(config("cannot concatenate pattern sets of different shapes"));
        }
        let mut inputs = self.inputs.clone();
        inputs.extend_from_slice(&other.inputs);
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        PatternSet::new(inputs, targets, self.o_min.min(other.o_min), self.o_max.max(other.o_max))
    }
}

fn check_dims(net: &Network, patterns: &PatternSet) -> Result<()> {
    if net.inputs() != patterns.input_dim() {
        return Err(Error::Dimension {
            context: "network inputs vs patterns",
            expected: net.inputs(),
            found: patterns.input_dim(),
        });
    }
    if net.outputs() != patterns.output_dim() {
        return Err(Error::Dimension {
            context: "network outputs vs patterns",
            expected: net.outputs(),
            found: patterns.output_dim(),
        });
    }
    Ok(())
}

/// Mean squared error percentage over a pattern set.
pub fn error_percentage(net: &Network, patterns: &PatternSet) -> Result<f64> {
    check_dims(net, patterns)?;
    let mut trace = ActivationTrace::default();
    let outputs = net.output_nodes();
    let mut sum = 0.0;
    for (x, d) in patterns.iter() {
        net.forward_into(x, &mut trace)?;
        for (y, t) in trace.node_values[outputs.clone()].iter().zip(d) {
            sum += (t - y) * (t - y);
        }
    }
    let t = patterns.len() as f64;
    let n = patterns.output_dim() as f64;
    Ok(100.0 * (patterns.o_max - patterns.o_min) / (t * n) * sum)
}

/// Adaptive learning-rate constants and update options.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MbpConfig {
    pub learning_rate: f64,
    pub rate_up: f64,
    pub rate_down: f64,
    pub rate_min: f64,
    pub rate_max: f64,
    /// Shuffle pattern order each epoch.
    pub shuffle: bool,
    /// Update bias weights (otherwise they stay at their initial values).
    pub train_bias: bool,
}

impl Default for MbpConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.15,
            rate_up: 1.05,
            rate_down: 0.6,
            rate_min: 1e-4,
            rate_max: 1.0,
            shuffle: false,
            train_bias: true,
        }
    }
}

impl MbpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_min >= 0.0 && self.rate_min <= self.rate_max) {
            return Err(config("learning-rate bounds must satisfy 0 <= min <= max"));
        }
        if !(self.rate_min..=self.rate_max).contains(&self.learning_rate) {
            return Err(config("initial learning rate outside its bounds"));
        }
        if !(self.rate_up >= 1.0 && self.rate_down > 0.0 && self.rate_down <= 1.0) {
            return Err(config("rate_up must be >= 1 and rate_down in (0, 1]"));
        }
        Ok(())
    }
}

/// Running mean and variance (Welford) of per-pattern update proposals for
/// every node pair, stored row-major like the weight matrix.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct UpdateStats {
    nodes: usize,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl UpdateStats {
    fn reset(&mut self, nodes: usize) {
        self.nodes = nodes;
        self.count = 0;
        self.mean.clear();
        self.mean.resize(nodes * nodes, 0.0);
        self.m2.clear();
        self.m2.resize(nodes * nodes, 0.0);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Builds statistics directly from samples of one node pair. Used to
    /// check the importance rule in isolation.
    pub fn from_samples(nodes: usize, to: usize, from: usize, samples: &[f64]) -> Self {
        Self::from_pairs(nodes, &[((to, from), samples.to_vec())]).expect("single pair")
    }

    /// Builds statistics from per-pair samples. Every pair must carry the
    /// same number of samples, as if each had been observed once per pattern.
    pub fn from_pairs(nodes: usize, pairs: &[((usize, usize), Vec<f64>)]) -> Result<Self> {
        let mut stats = UpdateStats::default();
        stats.reset(nodes);
        let count = pairs.first().map_or(0, |(_, s)| s.len());
        for ((to, from), samples) in pairs {
            if samples.len() != count {
                return Err(Error::Dimension { context: "samples per pair", expected: count, found: samples.len() });
            }
            if *to >= nodes || *from >= nodes {
                return Err(Error::Dimension { context: "pair index", expected: nodes, found: (*to).max(*from) });
            }
            let k = to * nodes + from;
            let (mut mean, mut m2) = (0.0, 0.0);
            for (i, &s) in samples.iter().enumerate() {
                let delta = s - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (s - mean);
            }
            stats.mean[k] = mean;
            stats.m2[k] = m2;
        }
        stats.count = count as u64;
        Ok(stats)
    }

    pub fn mean(&self, to: usize, from: usize) -> f64 {
        self.mean[to * self.nodes + from]
    }

    /// Population variance.
    pub fn variance(&self, to: usize, from: usize) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.m2[to * self.nodes + from] / self.count as f64).max(0.0)
        }
    }
}

/// Learning-rate state carried by an individual across training episodes.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainerState {
    pub config: MbpConfig,
    pub learning_rate: f64,
    pub last_epoch_error: f64,
    pub update_stats: UpdateStats,
}

impl TrainerState {
    pub fn new(config: MbpConfig) -> Self {
        Self {
            learning_rate: config.learning_rate,
            config,
            last_epoch_error: f64::INFINITY,
            update_stats: UpdateStats::default(),
        }
    }

    pub fn reset_stats(&mut self, nodes: usize) {
        self.update_stats.reset(nodes);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mark {
    Success,
    Failure,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Network,
    pub state: TrainerState,
    pub epochs_run: usize,
    pub error_before: f64,
    pub error_after: f64,
    pub mark: Mark,
}

/// Gradient of `½ Σ (d − y)²` for one pattern.
///
/// `weights` is row-major over node pairs. Entries for legal but absent
/// pairs hold the gradient the connection would have at weight zero; other
/// entries are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Default)]
struct Backprop {
    trace: ActivationTrace,
    delta: Vec<f64>,
}

impl Backprop {
    /// Forward then backward pass; fills `delta` with `∂L/∂net_i` and returns
    /// the pattern loss.
    fn run(&mut self, net: &Network, nodes: &[usize], input: &[f64], target: &[f64]) -> Result<f64> {
        net.forward_into(input, &mut self.trace)?;
        let d = net.node_count();
        self.delta.clear();
        self.delta.resize(d, 0.0);
        let weights = net.weight_matrix();
        let outputs = net.output_nodes();
        let mut loss = 0.0;
        for &i in nodes.iter().rev() {
            let mut err = 0.0;
            if outputs.contains(&i) {
                let e = self.trace.node_values[i] - target[i - outputs.start];
                loss += 0.5 * e * e;
                err += e;
            }
            for k in i + 1..d {
                err += weights[k * d + i] * self.delta[k];
            }
            let x = self.trace.node_values[i];
            self.delta[i] = err * x * (1.0 - x);
        }
        Ok(loss)
    }
}

/// Analytic per-pattern gradient, including virtual pairs.
pub fn pattern_gradient(net: &Network, input: &[f64], target: &[f64]) -> Result<Gradient> {
    if target.len() != net.outputs() {
        return Err(Error::Dimension {
            context: "pattern target",
            expected: net.outputs(),
            found: target.len(),
        });
    }
    let mut bp = Backprop::default();
    let nodes: Vec<usize> = net.computing_nodes().collect();
    let loss = bp.run(net, &nodes, input, target)?;
    let d = net.node_count();
    let mut weights = vec![0.0; d * d];
    for (to, from) in net.legal_pairs() {
        weights[to * d + from] = bp.delta[to] * bp.trace.node_values[from];
    }
    let mut bias = vec![0.0; net.bias_vector().len()];
    for i in net.computing_nodes() {
        bias[i - net.inputs()] = bp.delta[i] * BIAS_SOURCE;
    }
    Ok(Gradient { loss, weights, bias })
}

/// One pass of per-pattern gradient descent followed by learning-rate
/// adaptation. Update proposals are added to `state.update_stats`, which is
/// (re)initialized if its size does not match the network.
pub fn train_epoch<R: Rng + ?Sized>(
    net: &mut Network,
    train: &PatternSet,
    state: &mut TrainerState,
    rng: &mut R,
) -> Result<()> {
    check_dims(net, train)?;
    let d = net.node_count();
    if state.update_stats.nodes != d {
        state.reset_stats(d);
    }
    let pairs: Vec<(usize, usize, usize, bool)> = net
        .legal_pairs()
        .map(|(to, from)| (to * d + from, to, from, net.is_connected(to, from)))
        .collect();
    let nodes: Vec<usize> = net.computing_nodes().collect();
    let m = net.inputs();
    let mut order: Vec<usize> = (0..train.len()).collect();
    if state.config.shuffle {
        order.shuffle(rng);
    }
    let mut bp = Backprop::default();
    let mut epoch_loss = 0.0;
    let eta = state.learning_rate;
    for &p in &order {
        let loss = bp.run(net, &nodes, &train.inputs[p], &train.targets[p])?;
        epoch_loss += loss;
        let stats = &mut state.update_stats;
        stats.count += 1;
        let n = stats.count as f64;
        let weights = net.weight_matrix_mut();
        for &(k, to, from, connected) in &pairs {
            let proposal = -eta * bp.delta[to] * bp.trace.node_values[from];
            let dm = proposal - stats.mean[k];
            stats.mean[k] += dm / n;
            stats.m2[k] += dm * (proposal - stats.mean[k]);
            if connected {
                weights[k] += proposal;
            }
        }
        if state.config.train_bias {
            let bias = net.bias_vector_mut();
            for &i in &nodes {
                bias[i - m] -= eta * bp.delta[i] * BIAS_SOURCE;
            }
        }
    }
    let mean_loss = epoch_loss / train.len() as f64;
    let cfg = state.config;
    state.learning_rate = if mean_loss < state.last_epoch_error {
        (state.learning_rate * cfg.rate_up).min(cfg.rate_max)
    } else {
        (state.learning_rate * cfg.rate_down).max(cfg.rate_min)
    };
    state.last_epoch_error = mean_loss;
    Ok(())
}

/// Trains for `epochs` epochs and marks the result: success iff the
/// validation error fell below `(1 − success_threshold)` times its value
/// before training.
pub fn partial_train<R: Rng + ?Sized>(
    mut net: Network,
    train: &PatternSet,
    validation: &PatternSet,
    epochs: usize,
    mut state: TrainerState,
    success_threshold: f64,
    rng: &mut R,
) -> Result<TrainOutcome> {
    if epochs == 0 {
        return Err(config("partial training needs at least one epoch"));
    }
    if validation.is_empty() {
        return Err(Error::EmptyPatterns("validation set is empty"));
    }
    let error_before = error_percentage(&net, validation)?;
    state.reset_stats(net.node_count());
    for _ in 0..epochs {
        train_epoch(&mut net, train, &mut state, rng)?;
    }
    let error_after = error_percentage(&net, validation)?;
    let mark = if error_after < (1.0 - success_threshold) * error_before {
        Mark::Success
    } else {
        Mark::Failure
    };
    Ok(TrainOutcome { network: net, state, epochs_run: epochs, error_before, error_after, mark })
}

/// Importance of one node pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionImportance {
    pub to: usize,
    pub from: usize,
    pub present: bool,
    /// `+∞` when the proposals have zero spread but a nonzero numerator.
    pub importance: f64,
}

/// `|w + mean δ| / sd δ` for a weight and the statistics of its proposals.
pub fn importance_value(weight: f64, mean: f64, variance: f64) -> f64 {
    let numerator = (weight + mean).abs();
    if numerator == 0.0 {
        0.0
    } else if variance <= 0.0 {
        f64::INFINITY
    } else {
        numerator / variance.sqrt()
    }
}

/// Importance of every present connection and, when `include_virtual` is
/// set, of every absent legal pair evaluated at weight zero.
pub fn connection_significance(
    state: &TrainerState,
    net: &Network,
    include_virtual: bool,
) -> Result<Vec<ConnectionImportance>> {
    let stats = &state.update_stats;
    if stats.count == 0 {
        return Err(Error::MissingStatistics);
    }
    if stats.nodes != net.node_count() {
        return Err(Error::Dimension {
            context: "statistics vs network size",
            expected: net.node_count(),
            found: stats.nodes,
        });
    }
    Ok(net
        .legal_pairs()
        .filter_map(|(to, from)| {
            let present = net.is_connected(to, from);
            if !present && !include_virtual {
                return None;
            }
            let importance =
                importance_value(net.weight(to, from), stats.mean(to, from), stats.variance(to, from));
            Some(ConnectionImportance { to, from, present, importance })
        })
        .collect())
}
