//! EPNet: evolutionary programming over network architectures and weights.
//!
//! Each generation selects one parent by linear ranking. A parent marked
//! [`Mark::Success`] is trained further; a parent marked [`Mark::Failure`]
//! goes through the architectural mutations in a fixed order (hidden node
//! deletion, connection deletion, then connection addition competing with
//! node splitting) until one produces an offspring that enters the
//! population. Deletions are always tried before additions, which biases the
//! search toward small networks without a complexity term in the fitness.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config, Error, Result};
use crate::history::{Attempt, AttemptOutcome, EvolutionHistory, GenerationRecord, Operator};
use crate::network::{random_network, uniform, BiasInit, Network, RandomNetworkParams};
use crate::train::{
    connection_significance, error_percentage, partial_train, train_epoch, Mark, MbpConfig, PatternSet,
    TrainerState,
};

#[derive(Clone, Debug, PartialEq)]
pub struct EpnetConfig {
    /// `M`.
    pub population_size: usize,
    /// `K0`, epochs of initial partial training.
    pub initial_epochs: usize,
    /// `K1`, epochs of partial training during evolution.
    pub training_epochs: usize,
    /// Upper bound of the uniform draw for hidden nodes deleted or added.
    pub max_deleted_nodes: usize,
    /// Upper bound of the uniform draw for connections deleted or added.
    pub max_mutated_connections: usize,
    pub hidden_range: (usize, usize),
    /// Hidden slots available in the encoding.
    pub max_hidden_nodes: usize,
    pub density: f64,
    pub weight_init_range: (f64, f64),
    pub bias_init: BiasInit,
    pub mbp: MbpConfig,
    /// `ρ`: relative validation-error reduction needed for a success mark.
    pub success_threshold: f64,
    /// `ε`.
    pub stop_epsilon: f64,
    /// `G0`.
    pub stop_window: usize,
    pub max_generations: usize,
    pub final_training_epochs: usize,
    /// Range of the node-splitting coefficient.
    pub split_beta: (f64, f64),
    pub seed: u64,
}

impl Default for EpnetConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            initial_epochs: 50,
            training_epochs: 20,
            max_deleted_nodes: 1,
            max_mutated_connections: 3,
            hidden_range: (1, 3),
            max_hidden_nodes: 10,
            density: 1.0,
            weight_init_range: (-0.5, 0.5),
            bias_init: BiasInit::Constant(-1.5),
            mbp: MbpConfig::default(),
            success_threshold: 0.01,
            stop_epsilon: 0.01,
            stop_window: 10,
            max_generations: 500,
            final_training_epochs: 70,
            split_beta: (-0.5, 0.5),
            seed: 0,
        }
    }
}

impl EpnetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(config("population_size must be at least 2"));
        }
        if self.initial_epochs == 0 || self.training_epochs == 0 {
            return Err(config("initial_epochs and training_epochs must be at least 1"));
        }
        if self.max_deleted_nodes == 0 || self.max_mutated_connections == 0 {
            return Err(config("mutation counts must be at least 1"));
        }
        let (lo, hi) = self.hidden_range;
        if lo == 0 || lo > hi || hi > self.max_hidden_nodes {
            return Err(config("hidden_range must satisfy 1 <= lo <= hi <= max_hidden_nodes"));
        }
        if !(self.stop_epsilon > 0.0) || self.stop_window == 0 {
            return Err(config("stop_epsilon must be > 0 and stop_window >= 1"));
        }
        if !(0.0..1.0).contains(&self.success_threshold) {
            return Err(config("success_threshold must lie in [0, 1)"));
        }
        if self.split_beta.0 > self.split_beta.1 {
            return Err(config("split_beta range is empty"));
        }
        self.mbp.validate()
    }

    fn network_params(&self, inputs: usize, outputs: usize) -> RandomNetworkParams {
        RandomNetworkParams {
            inputs,
            outputs,
            max_hidden: self.max_hidden_nodes,
            hidden_range: self.hidden_range,
            density: self.density,
            weight_range: self.weight_init_range,
            bias_init: self.bias_init,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EpnetIndividual {
    pub network: Network,
    pub trainer_state: TrainerState,
    pub validation_error: f64,
    pub mark: Mark,
}

impl EpnetIndividual {
    fn from_outcome(outcome: crate::train::TrainOutcome) -> Self {
        Self {
            network: outcome.network,
            trainer_state: outcome.state,
            validation_error: outcome.error_after,
            mark: outcome.mark,
        }
    }

    /// Lower validation error wins; ties go to fewer connections.
    pub fn is_better_than(&self, other: &EpnetIndividual) -> bool {
        self.validation_error < other.validation_error
            || (self.validation_error == other.validation_error
                && self.network.connection_count() < other.network.connection_count())
    }
}

/// Sorts best-first by validation error, then connection count, then
/// current position.
pub fn sort_population(population: &mut [EpnetIndividual]) {
    population.sort_by(|a, b| {
        a.validation_error
            .total_cmp(&b.validation_error)
            .then(a.network.connection_count().cmp(&b.network.connection_count()))
    });
}

/// Generates and partially trains `M` random networks.
pub fn init_population<R: Rng + ?Sized>(
    cfg: &EpnetConfig,
    train: &PatternSet,
    validation: &PatternSet,
    rng: &mut R,
) -> Result<Vec<EpnetIndividual>> {
    cfg.validate()?;
    if train.input_dim() != validation.input_dim() || train.output_dim() != validation.output_dim() {
        return Err(Error::Dimension {
            context: "validation set shape",
            expected: train.input_dim(),
            found: validation.input_dim(),
        });
    }
    let params = cfg.network_params(train.input_dim(), train.output_dim());
    let mut population = Vec::with_capacity(cfg.population_size);
    for _ in 0..cfg.population_size {
        let net = random_network(&params, rng)?;
        let outcome = partial_train(
            net,
            train,
            validation,
            cfg.initial_epochs,
            TrainerState::new(cfg.mbp),
            cfg.success_threshold,
            rng,
        )?;
        population.push(EpnetIndividual::from_outcome(outcome));
    }
    sort_population(&mut population);
    Ok(population)
}

/// Linear-ranking selection over a best-first population of size `M`:
/// 0-based position `k` is chosen with probability `2(M − k) / (M(M + 1))`.
pub fn rank_select<R: Rng + ?Sized>(population_size: usize, rng: &mut R) -> Result<usize> {
    if population_size == 0 {
        return Err(config("cannot select from an empty population"));
    }
    let m = population_size as u64;
    let mut ticket = rng.random_range(0..m * (m + 1) / 2);
    for k in 0..m {
        let weight = m - k;
        if ticket < weight {
            return Ok(k as usize);
        }
        ticket -= weight;
    }
    unreachable!("ticket drawn below the total weight")
}

/// Deletes `count` distinct hidden nodes chosen uniformly. Returns `None`
/// when the deletion would leave no hidden node.
pub fn delete_nodes<R: Rng + ?Sized>(net: &Network, count: usize, rng: &mut R) -> Option<Network> {
    if count == 0 || count >= net.hidden_count() {
        return None;
    }
    let first = net.hidden_nodes().start;
    let mut chosen: Vec<usize> = index::sample(rng, net.hidden_count(), count).into_vec();
    chosen.sort_unstable_by(|a, b| b.cmp(a));
    let mut out = net.clone();
    for offset in chosen {
        out.delete_hidden(first + offset).expect("node is active and not the last");
    }
    Some(out)
}

/// Removes up to `count` present connections, drawn without replacement
/// with probability proportional to `1 / (1 + importance)`. At least one
/// connection always survives. `None` means nothing could be deleted.
pub fn delete_connections<R: Rng + ?Sized>(
    net: &Network,
    state: &TrainerState,
    count: usize,
    rng: &mut R,
) -> Result<Option<Network>> {
    let present = net.connection_count();
    let count = count.min(present.saturating_sub(1));
    if count == 0 {
        return Ok(None);
    }
    let mut candidates: Vec<((usize, usize), f64)> = connection_significance(state, net, false)?
        .into_iter()
        .map(|c| ((c.to, c.from), 1.0 / (1.0 + c.importance)))
        .collect();
    let mut out = net.clone();
    let mut deleted = 0;
    for _ in 0..count {
        let Some(k) = weighted_pick(&candidates, rng) else { break };
        let ((to, from), _) = candidates.swap_remove(k);
        out.disconnect(to, from);
        deleted += 1;
    }
    Ok((deleted > 0).then_some(out))
}

/// Initial weight given to connections created by [`add_connections`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AddedWeight {
    Zero,
    Uniform(f64, f64),
}

/// Adds up to `count` absent legal connections, drawn without replacement
/// with probability proportional to their importance at weight zero.
/// Infinite importances are drawn first (uniformly among themselves); if all
/// importances are zero the draw is uniform. `None` when the network is
/// already fully connected.
pub fn add_connections<R: Rng + ?Sized>(
    net: &Network,
    state: &TrainerState,
    count: usize,
    init: AddedWeight,
    rng: &mut R,
) -> Result<Option<Network>> {
    if net.virtual_pairs().next().is_none() || count == 0 {
        return Ok(None);
    }
    let mut candidates: Vec<((usize, usize), f64)> = connection_significance(state, net, true)?
        .into_iter()
        .filter(|c| !c.present)
        .map(|c| ((c.to, c.from), c.importance))
        .collect();
    let mut out = net.clone();
    for _ in 0..count.min(candidates.len()) {
        let infinite: Vec<usize> = (0..candidates.len()).filter(|&k| candidates[k].1.is_infinite()).collect();
        let k = if !infinite.is_empty() {
            infinite[rng.random_range(0..infinite.len())]
        } else {
            match weighted_pick(&candidates, rng) {
                Some(k) => k,
                None => rng.random_range(0..candidates.len()),
            }
        };
        let ((to, from), _) = candidates.swap_remove(k);
        let w = match init {
            AddedWeight::Zero => 0.0,
            AddedWeight::Uniform(lo, hi) => uniform(rng, lo, hi),
        };
        out.connect(to, from, w)?;
    }
    Ok(Some(out))
}

/// Splits a uniformly chosen hidden node with `β` uniform in `beta_range`.
/// `None` when every hidden slot is in use.
pub fn split_node<R: Rng + ?Sized>(net: &Network, rng: &mut R, beta_range: (f64, f64)) -> Option<Network> {
    if net.hidden_count() >= net.max_hidden() {
        return None;
    }
    let node = net.hidden_nodes().start + rng.random_range(0..net.hidden_count());
    let beta = uniform(rng, beta_range.0, beta_range.1);
    let mut out = net.clone();
    out.split_hidden(node, beta).expect("slot available");
    Some(out)
}

fn weighted_pick<T, R: Rng + ?Sized>(items: &[(T, f64)], rng: &mut R) -> Option<usize> {
    let total: f64 = items.iter().map(|(_, w)| *w).sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (k, (_, w)) in items.iter().enumerate() {
        if *w > 0.0 {
            if u < *w {
                return Some(k);
            }
            u -= w;
            last = Some(k);
        }
    }
    last
}

/// Result of one EPNet run.
#[derive(Clone, Debug)]
pub struct EpnetRun {
    /// Best individual's network after the final training on the combined
    /// training and validation sets.
    pub network: Network,
    /// Validation error of the best individual before final training.
    pub validation_error: f64,
    pub history: EvolutionHistory,
    pub generations: usize,
    pub population: Vec<EpnetIndividual>,
}

struct Evolution<'a> {
    cfg: &'a EpnetConfig,
    train: &'a PatternSet,
    validation: &'a PatternSet,
    rng: ChaCha8Rng,
    population: Vec<EpnetIndividual>,
}

impl Evolution<'_> {
    fn train_offspring(&mut self, net: Network, parent: &EpnetIndividual) -> Result<EpnetIndividual> {
        let outcome = partial_train(
            net,
            self.train,
            self.validation,
            self.cfg.training_epochs,
            parent.trainer_state.clone(),
            self.cfg.success_threshold,
            &mut self.rng,
        )?;
        let child = EpnetIndividual::from_outcome(outcome);
        debug_assert!(child.network.check_invariants().is_ok());
        Ok(child)
    }

    fn worst(&self) -> &EpnetIndividual {
        self.population.last().expect("population is never empty")
    }

    fn replace_worst(&mut self, child: EpnetIndividual) {
        *self.population.last_mut().expect("population is never empty") = child;
        sort_population(&mut self.population);
    }

    /// One generation: train or mutate a selected parent. Returns the attempts
    /// made.
    fn step(&mut self) -> Result<Vec<Attempt>> {
        let cfg = self.cfg;
        let k = rank_select(self.population.len(), &mut self.rng)?;
        let parent = self.population[k].clone();
        let mut attempts = Vec::new();
        let mut note = |operator, outcome| attempts.push(Attempt { operator, outcome });

        if parent.mark == Mark::Success {
            let child = self.train_offspring(parent.network.clone(), &parent)?;
            if child.validation_error <= parent.validation_error {
                self.population[k] = child;
                note(Operator::Training, AttemptOutcome::Accepted);
            } else {
                self.population[k].mark = Mark::Failure;
                note(Operator::Training, AttemptOutcome::Rejected);
            }
            sort_population(&mut self.population);
            return Ok(attempts);
        }

        let nodes = self.rng.random_range(1..=cfg.max_deleted_nodes);
        let nodes = nodes.min(parent.network.hidden_count().saturating_sub(1));
        match delete_nodes(&parent.network, nodes, &mut self.rng) {
            Some(net) => {
                let child = self.train_offspring(net, &parent)?;
                if child.is_better_than(self.worst()) {
                    self.replace_worst(child);
                    note(Operator::NodeDeletion, AttemptOutcome::Accepted);
                    return Ok(attempts);
                }
                note(Operator::NodeDeletion, AttemptOutcome::Rejected);
            }
            None => note(Operator::NodeDeletion, AttemptOutcome::Skipped),
        }

        let count = self.rng.random_range(1..=cfg.max_mutated_connections);
        match delete_connections(&parent.network, &parent.trainer_state, count, &mut self.rng)? {
            Some(net) => {
                let child = self.train_offspring(net, &parent)?;
                if child.is_better_than(self.worst()) {
                    self.replace_worst(child);
                    note(Operator::ConnectionDeletion, AttemptOutcome::Accepted);
                    return Ok(attempts);
                }
                note(Operator::ConnectionDeletion, AttemptOutcome::Rejected);
            }
            None => note(Operator::ConnectionDeletion, AttemptOutcome::Skipped),
        }

        let count = self.rng.random_range(1..=cfg.max_mutated_connections);
        let init = AddedWeight::Uniform(cfg.weight_init_range.0, cfg.weight_init_range.1);
        let with_connections =
            match add_connections(&parent.network, &parent.trainer_state, count, init, &mut self.rng)? {
                Some(net) => Some(self.train_offspring(net, &parent)?),
                None => None,
            };
        let nodes = self.rng.random_range(1..=cfg.max_deleted_nodes);
        let mut grown = None;
        for _ in 0..nodes {
            let base = grown.as_ref().unwrap_or(&parent.network);
            match split_node(base, &mut self.rng, cfg.split_beta) {
                Some(net) => grown = Some(net),
                None => break,
            }
        }
        let with_nodes = match grown {
            Some(net) => Some(self.train_offspring(net, &parent)?),
            None => None,
        };

        let winner = match (&with_connections, &with_nodes) {
            (Some(a), Some(b)) => Some(if b.is_better_than(a) { Operator::NodeAddition } else { Operator::ConnectionAddition }),
            (Some(_), None) => Some(Operator::ConnectionAddition),
            (None, Some(_)) => Some(Operator::NodeAddition),
            (None, None) => None,
        };
        for (operator, child) in [
            (Operator::ConnectionAddition, &with_connections),
            (Operator::NodeAddition, &with_nodes),
        ] {
            let outcome = match (child, winner == Some(operator)) {
                (None, _) => AttemptOutcome::Skipped,
                (Some(_), true) => AttemptOutcome::Accepted,
                (Some(_), false) => AttemptOutcome::Rejected,
            };
            note(operator, outcome);
        }
        let survivor = match winner {
            Some(Operator::ConnectionAddition) => with_connections,
            Some(_) => with_nodes,
            None => None,
        };
        if let Some(child) = survivor {
            self.replace_worst(child);
        }
        Ok(attempts)
    }

    fn record(&self, generation: usize, attempts: Vec<Attempt>) -> Result<GenerationRecord> {
        let best = &self.population[0];
        Ok(GenerationRecord {
            generation,
            best_error: best.validation_error,
            mean_error: mean_error(&self.population),
            best_connections: best.network.connection_count(),
            best_hidden: best.network.hidden_count(),
            best_train_error: error_percentage(&best.network, self.train)?,
            best_validation_error: best.validation_error,
            attempts,
        })
    }
}

fn mean_error(population: &[EpnetIndividual]) -> f64 {
    population.iter().map(|i| i.validation_error).sum::<f64>() / population.len() as f64
}

/// Runs EPNet end to end: initial population, the evolutionary loop, and the
/// final training of the best network on training plus validation data.
///
/// The loop stops after `max_generations`, or once the population's mean
/// validation error has decreased by no more than `stop_epsilon` over the
/// last `stop_window` generations.
pub fn evolve(cfg: &EpnetConfig, train: &PatternSet, validation: &PatternSet) -> Result<EpnetRun> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let population = init_population(cfg, train, validation, &mut rng)?;
    let mut evo = Evolution { cfg, train, validation, rng, population };
    let mut history = EvolutionHistory::default();
    let mut means = vec![mean_error(&evo.population)];
    let mut generations = 0;
    while generations < cfg.max_generations {
        generations += 1;
        let attempts = evo.step()?;
        history.records.push(evo.record(generations, attempts)?);
        means.push(mean_error(&evo.population));
        if generations >= cfg.stop_window
            && means[generations - cfg.stop_window] - means[generations] <= cfg.stop_epsilon
        {
            break;
        }
    }

    let best = evo.population[0].clone();
    let combined = train.concat(validation)?;
    let mut network = best.network.clone();
    let mut state = best.trainer_state.clone();
    for _ in 0..cfg.final_training_epochs {
        train_epoch(&mut network, &combined, &mut state, &mut evo.rng)?;
    }
    Ok(EpnetRun {
        network,
        validation_error: best.validation_error,
        history,
        generations,
        population: evo.population,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::UpdateStats;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn full_net(inputs: usize, outputs: usize, hidden: usize, max_hidden: usize, seed: u64) -> Network {
        let params = RandomNetworkParams {
            inputs,
            outputs,
            max_hidden,
            hidden_range: (hidden, hidden),
            density: 1.0,
            weight_range: (-0.5, 0.5),
            bias_init: BiasInit::Constant(-1.5),
        };
        random_network(&params, &mut rng(seed)).unwrap()
    }

    /// A trainer state whose statistics give every legal pair the same
    /// finite, nonzero spread and zero mean.
    fn flat_stats(net: &Network) -> TrainerState {
        let mut state = TrainerState::new(MbpConfig::default());
        state.update_stats = stats_for(net, |_, _| vec![0.1, -0.1]);
        state
    }

    fn stats_for(net: &Network, samples: impl Fn(usize, usize) -> Vec<f64>) -> UpdateStats {
        let per_pair: Vec<_> = net.legal_pairs().map(|(t, f)| ((t, f), samples(t, f))).collect();
        UpdateStats::from_pairs(net.node_count(), &per_pair).unwrap()
    }

    #[test]
    fn rank_select_single() {
        let mut r = rng(0);
        for _ in 0..100 {
            assert_eq!(rank_select(1, &mut r).unwrap(), 0);
        }
        assert!(rank_select(0, &mut r).is_err());
    }

    #[test]
    fn rank_select_frequencies() {
        let mut r = rng(1);
        let draws = 100_000;
        for (m, expected) in [(2usize, vec![2.0 / 3.0, 1.0 / 3.0]), (3, vec![0.5, 1.0 / 3.0, 1.0 / 6.0])] {
            let mut counts = vec![0usize; m];
            for _ in 0..draws {
                counts[rank_select(m, &mut r).unwrap()] += 1;
            }
            for (c, p) in counts.iter().zip(&expected) {
                let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
                assert!((*c as f64 - draws as f64 * p).abs() < 3.0 * sigma, "{counts:?} vs {expected:?}");
            }
        }
    }

    #[test]
    fn node_deletion_bounds() {
        let one = full_net(2, 1, 1, 4, 0);
        assert!(delete_nodes(&one, 1, &mut rng(0)).is_none());
        let three = full_net(2, 1, 3, 4, 0);
        let two = delete_nodes(&three, 1, &mut rng(0)).unwrap();
        assert_eq!(two.hidden_count(), 2);
        two.check_invariants().unwrap();
        let unused = two.hidden_nodes().end;
        for node in 0..two.node_count() {
            assert!(!two.is_connected(node, unused) && !two.is_connected(unused, node));
        }
        assert!(delete_nodes(&three, 3, &mut rng(0)).is_none());
    }

    #[test]
    fn node_deletion_count_draws() {
        let mut r = rng(5);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let n = r.random_range(1..=3usize);
            seen[n] = true;
            let net = full_net(2, 1, 4, 4, 1);
            assert_eq!(delete_nodes(&net, n, &mut r).unwrap().hidden_count(), 4 - n);
        }
        assert_eq!(seen, [false, true, true, true]);
    }

    #[test]
    fn sentinel_connection_never_deleted() {
        let net = full_net(1, 1, 1, 1, 2);
        let pairs: Vec<_> = net.connections().collect();
        let protected = pairs[0];
        let mut state = TrainerState::new(MbpConfig::default());
        // The protected pair gets identical nonzero proposals, so its
        // importance is infinite and its deletion weight zero.
        state.update_stats = stats_for(&net, |t, f| {
            if (t, f) == protected {
                vec![0.2, 0.2]
            } else {
                let w = net.weight(t, f);
                vec![-w + 0.05, -w - 0.05]
            }
        });
        let mut r = rng(3);
        for _ in 0..500 {
            let out = delete_connections(&net, &state, 1, &mut r).unwrap().unwrap();
            assert!(out.is_connected(protected.0, protected.1));
        }
    }

    #[test]
    fn equal_importance_deletion_is_uniform() {
        let mut net = full_net(2, 1, 2, 2, 4);
        let pairs: Vec<_> = net.connections().collect();
        for &(t, f) in &pairs {
            net.set_weight(t, f, 0.3).unwrap();
        }
        let state = flat_stats(&net);
        let draws = 10_000;
        let mut counts = vec![0usize; pairs.len()];
        let mut r = rng(6);
        for _ in 0..draws {
            let out = delete_connections(&net, &state, 1, &mut r).unwrap().unwrap();
            let gone = pairs.iter().position(|&(t, f)| !out.is_connected(t, f)).unwrap();
            counts[gone] += 1;
        }
        let expected = draws as f64 / pairs.len() as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of chi-square with pairs.len() - 1 = 8 degrees of freedom.
        assert_eq!(pairs.len(), 9);
        assert!(chi2 < 20.090, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn deletion_keeps_one_connection() {
        let mut net = Network::empty(1, 1, 1, 1).unwrap();
        let h = net.hidden_nodes().start;
        let o = net.output_nodes().start;
        net.connect(h, 0, 0.3).unwrap();
        net.connect(o, h, 0.4).unwrap();
        let state = flat_stats(&net);
        let out = delete_connections(&net, &state, 1, &mut rng(0)).unwrap().unwrap();
        assert_eq!(out.connection_count(), 1);
        let out = delete_connections(&out, &flat_stats(&out), 5, &mut rng(0)).unwrap();
        assert!(out.is_none());
    }

    #[test]
    fn addition_on_full_network_skips() {
        let net = full_net(2, 2, 2, 3, 7);
        let state = flat_stats(&net);
        assert!(add_connections(&net, &state, 1, AddedWeight::Zero, &mut rng(0)).unwrap().is_none());
    }

    #[test]
    fn addition_fills_missing_connection_without_changing_function() {
        let mut net = full_net(2, 2, 2, 3, 8);
        let o = net.output_nodes().start;
        net.disconnect(o, 1);
        let state = flat_stats(&net);
        let out = add_connections(&net, &state, 1, AddedWeight::Zero, &mut rng(0)).unwrap().unwrap();
        assert!(out.is_connected(o, 1));
        assert_eq!(out.virtual_pairs().count(), 0);
        for x in [[0.1, 0.2], [0.9, -0.3]] {
            assert_eq!(out.forward(&x).unwrap(), net.forward(&x).unwrap());
        }
    }

    #[test]
    fn split_coefficients() {
        let mut net = Network::empty(1, 1, 2, 1).unwrap();
        let h = net.hidden_nodes().start;
        let o = net.output_nodes().start;
        net.connect(h, 0, 0.7).unwrap();
        net.connect(o, h, 2.0).unwrap();
        let mut zero = net.clone();
        let copy = zero.split_hidden(h, 0.0).unwrap();
        assert_eq!(zero.weight(o, h), 2.0);
        assert_eq!(zero.weight(o, copy), 0.0);
        let mut half = net.clone();
        let copy = half.split_hidden(h, 0.5).unwrap();
        assert_eq!((half.weight(o, h), half.weight(o, copy)), (3.0, -1.0));
        assert_eq!(half.weight(copy, 0), 0.7);
        for x in [-1.0, 0.0, 0.4, 2.0] {
            let a = net.forward(&[x]).unwrap()[0];
            let b = half.forward(&[x]).unwrap()[0];
            assert!((a - b).abs() < 1e-12);
        }
        assert!(split_node(&half, &mut rng(0), (-0.5, 0.5)).is_none());
    }

    #[test]
    fn split_preserves_function_on_random_networks() {
        let mut r = rng(9);
        for seed in 0..20 {
            let net = full_net(3, 2, 2, 5, seed);
            let split = split_node(&net, &mut r, (-0.5, 0.5)).unwrap();
            split.check_invariants().unwrap();
            assert_eq!(split.hidden_count(), 3);
            for _ in 0..20 {
                let x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
                let a = net.forward(&x).unwrap();
                let b = split.forward(&x).unwrap();
                for (u, v) in a.iter().zip(&b) {
                    assert!((u - v).abs() < 1e-9);
                }
            }
        }
    }

    fn toy_data() -> (PatternSet, PatternSet) {
        let mut r = rng(42);
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for _ in 0..40 {
            let x: Vec<f64> = (0..3).map(|_| r.random::<f64>()).collect();
            let class = usize::from(x[0] + x[1] > 1.0);
            let mut t = vec![0.0, 0.0];
            t[class] = 1.0;
            inputs.push(x);
            targets.push(t);
        }
        let train = PatternSet::new(inputs[..30].to_vec(), targets[..30].to_vec(), 0.0, 1.0).unwrap();
        let val = PatternSet::new(inputs[30..].to_vec(), targets[30..].to_vec(), 0.0, 1.0).unwrap();
        (train, val)
    }

    fn small_config() -> EpnetConfig {
        EpnetConfig {
            population_size: 6,
            initial_epochs: 5,
            training_epochs: 3,
            hidden_range: (1, 3),
            max_hidden_nodes: 5,
            max_generations: 40,
            final_training_epochs: 5,
            seed: 17,
            ..EpnetConfig::default()
        }
    }

    #[test]
    fn initial_population_shape() {
        let (train, val) = toy_data();
        let cfg = EpnetConfig { population_size: 2, ..small_config() };
        let pop = init_population(&cfg, &train, &val, &mut rng(1)).unwrap();
        assert_eq!(pop.len(), 2);
        let cfg = small_config();
        let a = init_population(&cfg, &train, &val, &mut rng(2)).unwrap();
        let b = init_population(&cfg, &train, &val, &mut rng(2)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.network, y.network);
            assert_eq!(x.validation_error, y.validation_error);
        }
        for ind in &a {
            assert!((1..=3).contains(&ind.network.hidden_count()));
            assert_eq!(ind.network.virtual_pairs().count(), 0);
            let e = error_percentage(&ind.network, &val).unwrap();
            assert_eq!(e, ind.validation_error);
        }
    }

    #[test]
    fn zero_generations() {
        let (train, val) = toy_data();
        let cfg = EpnetConfig { max_generations: 0, ..small_config() };
        let run = evolve(&cfg, &train, &val).unwrap();
        assert!(run.history.is_empty());
        assert_eq!(run.generations, 0);
    }

    #[test]
    fn evolution_invariants_and_determinism() {
        let (train, val) = toy_data();
        let cfg = small_config();
        let a = evolve(&cfg, &train, &val).unwrap();
        let b = evolve(&cfg, &train, &val).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.network, b.network);
        assert!(a.history.is_best_non_increasing());
        assert_eq!(a.population.len(), cfg.population_size);
        for ind in &a.population {
            ind.network.check_invariants().unwrap();
        }
        for rec in &a.history.records {
            let first_addition = rec.attempts.iter().position(|t| {
                matches!(t.operator, Operator::ConnectionAddition | Operator::NodeAddition)
            });
            let last_deletion = rec.attempts.iter().rposition(|t| {
                matches!(t.operator, Operator::NodeDeletion | Operator::ConnectionDeletion)
            });
            if let (Some(add), Some(del)) = (first_addition, last_deletion) {
                assert!(del < add, "{:?}", rec.attempts);
            }
        }
    }
}
