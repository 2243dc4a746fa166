//! A (μ+μ) evolution strategy over the flattened weights of a fixed network.
//!
//! Every generation the population is shuffled into `l` equal subpopulations.
//! Each subpopulation recombines its lowest-cost member (the elite) with the
//! mean of its other members (the virtual parent) by arithmetic crossover
//! with a fresh mixing coefficient per variable. Offspring receive a Gaussian
//! perturbation whose scale shrinks to zero at the final generation, and the
//! best `μ` of parents plus offspring survive.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{config, Error, Result};
use crate::history::{Attempt, AttemptOutcome, EvolutionHistory, GenerationRecord, Operator};
use crate::network::{uniform, Network};
use crate::train::{error_percentage, PatternSet};

/// Where the uniform draw `r` enters the step-size schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SigmaForm {
    /// `σ(t) = 1 − r^((1 − t/T)^γ)`.
    #[default]
    Power,
    /// `σ(t) = 1 − r·(1 − t/T)^γ`.
    Coefficient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NesConfig {
    /// `μ`.
    pub population_size: usize,
    /// `l`; must divide `μ`.
    pub subpopulations: usize,
    pub gamma: f64,
    /// `T`. Zero returns the best initial genome.
    pub max_generations: usize,
    pub genome_domain: (f64, f64),
    pub init_range: (f64, f64),
    pub hidden_nodes: usize,
    pub sigma_form: SigmaForm,
    /// Stop as soon as the best training cost reaches this value.
    pub target_cost: Option<f64>,
    pub seed: u64,
}

impl Default for NesConfig {
    fn default() -> Self {
        Self {
            population_size: 20,
            subpopulations: 4,
            gamma: 8.0,
            max_generations: 500,
            genome_domain: (-10.0, 10.0),
            init_range: (-0.5, 0.5),
            hidden_nodes: 8,
            sigma_form: SigmaForm::Power,
            target_cost: None,
            seed: 0,
        }
    }
}

impl NesConfig {
    pub fn validate(&self) -> Result<()> {
        let (mu, l) = (self.population_size, self.subpopulations);
        if l == 0 || mu % l != 0 {
            return Err(config(format!("population_size {mu} is not divisible by subpopulations {l}")));
        }
        if mu / l < 2 {
            return Err(config("each subpopulation needs at least 2 members"));
        }
        if !(self.gamma > 0.0) {
            return Err(config("gamma must be positive"));
        }
        let (lo, hi) = self.genome_domain;
        if !(lo < hi) {
            return Err(config("genome_domain must satisfy lo < hi"));
        }
        let (a, b) = self.init_range;
        if !(a <= b) || a < lo || b > hi {
            return Err(config("init_range must be a non-empty interval inside genome_domain"));
        }
        if self.hidden_nodes == 0 {
            return Err(config("hidden_nodes must be at least 1"));
        }
        Ok(())
    }

    fn in_domain(&self, genome: &[f64]) -> bool {
        let (lo, hi) = self.genome_domain;
        genome.iter().all(|&x| (lo..=hi).contains(&x))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NesIndividual {
    pub genome: Vec<f64>,
    /// Training-set error; `None` until evaluated.
    pub cost: Option<f64>,
}

impl NesIndividual {
    pub fn new(genome: Vec<f64>) -> Self {
        Self { genome, cost: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subpopulation {
    /// Population indices of the members.
    pub members: Vec<usize>,
    /// Population index of the lowest-cost member.
    pub elite: usize,
    /// Mean genome of the members other than the elite.
    pub virtual_parent: Vec<f64>,
}

/// Arithmetic crossover with explicit mixing coefficients:
/// `child1 = α·elite + (1 − α)·virtual`, `child2 = (1 − α)·elite + α·virtual`.
pub fn sbmac_with_alpha(elite: &[f64], virtual_parent: &[f64], alpha: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if elite.len() != virtual_parent.len() || alpha.len() != elite.len() {
        return Err(Error::Dimension {
            context: "crossover operand length",
            expected: elite.len(),
            found: if alpha.len() != elite.len() { alpha.len() } else { virtual_parent.len() },
        });
    }
    let mut c1 = Vec::with_capacity(elite.len());
    let mut c2 = Vec::with_capacity(elite.len());
    for ((&e, &v), &a) in elite.iter().zip(virtual_parent).zip(alpha) {
        let (x, y) = conserve(e, v, a * e + (1.0 - a) * v, (1.0 - a) * e + a * v);
        c1.push(x);
        c2.push(y);
    }
    Ok((c1, c2))
}

/// Adjusts the children by a few ulps so that `x + y == e + v` in floating
/// point while both stay between `e` and `v`. A rounding tie can make this
/// impossible with one child fixed, so nearby values of the first child are
/// tried, then nearby values of the second.
fn conserve(e: f64, v: f64, x: f64, y: f64) -> (f64, f64) {
    let sum = e + v;
    if x + y == sum {
        return (x, y);
    }
    let (lo, hi) = (e.min(v), e.max(v));
    let solve = |fixed: f64| {
        let mut other = sum - fixed;
        for _ in 0..6 {
            let got = fixed + other;
            if got == sum && (lo..=hi).contains(&other) {
                return Some(other);
            }
            other = if got < sum { other.next_up() } else { other.next_down() };
        }
        None
    };
    let walk = |start: f64| {
        let (mut up, mut down) = (start, start);
        for _ in 0..64 {
            for c in [up, down] {
                if let Some(other) = (lo..=hi).contains(&c).then(|| solve(c)).flatten() {
                    return Some((c, other));
                }
            }
            up = up.next_up();
            down = down.next_down();
        }
        None
    };
    walk(x).or_else(|| walk(y).map(|(b, a)| (a, b))).unwrap_or((x, y))
}

/// Crossover with one uniform `α` per variable.
pub fn sbmac_pair<R: Rng + ?Sized>(
    elite: &[f64],
    virtual_parent: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let alpha: Vec<f64> = (0..elite.len()).map(|_| rng.random::<f64>()).collect();
    sbmac_with_alpha(elite, virtual_parent, &alpha)
}

/// Step size at generation `t` for a given uniform draw `r`.
pub fn tvm_sigma(t: usize, cfg: &NesConfig, r: f64) -> f64 {
    if cfg.max_generations == 0 {
        return 0.0;
    }
    let remaining = (1.0 - t as f64 / cfg.max_generations as f64).max(0.0);
    let decay = remaining.powf(cfg.gamma);
    match cfg.sigma_form {
        SigmaForm::Power => 1.0 - r.powf(decay),
        SigmaForm::Coefficient => 1.0 - r * decay,
    }
}

/// Adds `σ·g_i` to each variable. Returns `None` if any result leaves the
/// domain, in which case the caller keeps the genome unmutated.
pub fn perturb(genome: &[f64], sigma: f64, gaussians: &[f64], domain: (f64, f64)) -> Option<Vec<f64>> {
    assert_eq!(genome.len(), gaussians.len(), "one Gaussian per variable");
    let out: Vec<f64> = genome.iter().zip(gaussians).map(|(x, g)| x + sigma * g).collect();
    out.iter().all(|x| (domain.0..=domain.1).contains(x)).then_some(out)
}

/// Mutates an offspring with one `σ(t)` and a fresh Gaussian per variable.
/// The offspring is returned unmutated if the step would leave the domain.
pub fn tvm_mutate<R: Rng + ?Sized>(child: NesIndividual, t: usize, cfg: &NesConfig, rng: &mut R) -> NesIndividual {
    let sigma = tvm_sigma(t, cfg, rng.random::<f64>());
    let gaussians: Vec<f64> = (0..child.genome.len()).map(|_| rng.sample(StandardNormal)).collect();
    match perturb(&child.genome, sigma, &gaussians, cfg.genome_domain) {
        Some(genome) if genome != child.genome => NesIndividual { genome, cost: None },
        _ => child,
    }
}

/// Shuffles population indices into `l` blocks and computes each block's
/// elite and virtual parent. Every individual must be evaluated.
pub fn partition_subpopulations<R: Rng + ?Sized>(
    population: &[NesIndividual],
    l: usize,
    rng: &mut R,
) -> Result<Vec<Subpopulation>> {
    if l == 0 || !population.len().is_multiple_of(l) || population.len() / l < 2 {
        return Err(config(format!(
            "cannot split {} individuals into {l} subpopulations of at least 2",
            population.len()
        )));
    }
    let costs = costs(population)?;
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.shuffle(rng);
    let size = population.len() / l;
    Ok(order
        .chunks(size)
        .map(|block| {
            let elite = *block
                .iter()
                .min_by(|&&a, &&b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)))
                .expect("non-empty block");
            let len = population[elite].genome.len();
            let mut mean = vec![0.0; len];
            for &k in block.iter().filter(|&&k| k != elite) {
                for (m, x) in mean.iter_mut().zip(&population[k].genome) {
                    *m += x;
                }
            }
            let others = (block.len() - 1) as f64;
            mean.iter_mut().for_each(|m| *m /= others);
            Subpopulation { members: block.to_vec(), elite, virtual_parent: mean }
        })
        .collect())
}

fn costs(population: &[NesIndividual]) -> Result<Vec<f64>> {
    population
        .iter()
        .enumerate()
        .map(|(k, ind)| ind.cost.ok_or(Error::Unevaluated(k)))
        .collect()
}

/// (μ+μ) survivor selection: the `μ` lowest-cost individuals of parents and
/// children. Ties prefer parents, then the lower index.
pub fn alternate_generation(parents: Vec<NesIndividual>, children: Vec<NesIndividual>) -> Result<Vec<NesIndividual>> {
    if children.len() != parents.len() {
        return Err(Error::Dimension {
            context: "offspring count",
            expected: parents.len(),
            found: children.len(),
        });
    }
    let mu = parents.len();
    let mut pool: Vec<(f64, NesIndividual)> = Vec::with_capacity(2 * mu);
    for (k, ind) in parents.into_iter().chain(children).enumerate() {
        let cost = ind.cost.ok_or(Error::Unevaluated(k))?;
        pool.push((cost, ind));
    }
    // Stable sort keeps parents (first half) ahead of equal-cost children.
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    pool.truncate(mu);
    Ok(pool.into_iter().map(|(_, ind)| ind).collect())
}

/// Result of one NES run.
#[derive(Clone, Debug)]
pub struct NesRun {
    pub genome: Vec<f64>,
    pub network: Network,
    /// Training error of the best genome.
    pub cost: f64,
    pub history: EvolutionHistory,
    pub generations: usize,
    pub population: Vec<NesIndividual>,
}

struct Evaluator<'a> {
    scratch: Network,
    train: &'a PatternSet,
}

impl Evaluator<'_> {
    fn network(&mut self, genome: &[f64]) -> Result<&Network> {
        self.scratch.load_genome(genome)?;
        Ok(&self.scratch)
    }

    fn evaluate(&mut self, ind: &mut NesIndividual) -> Result<()> {
        if ind.cost.is_none() {
            let train = self.train;
            ind.cost = Some(error_percentage(self.network(&ind.genome)?, train)?);
        }
        Ok(())
    }
}

/// Produces `μ/l` offspring from one subpopulation.
fn offspring<R: Rng + ?Sized>(
    sub: &Subpopulation,
    population: &[NesIndividual],
    rng: &mut R,
) -> Result<Vec<NesIndividual>> {
    let wanted = sub.members.len();
    let elite = &population[sub.elite].genome;
    let mut out = Vec::with_capacity(wanted);
    while out.len() < wanted {
        let (c1, c2) = sbmac_pair(elite, &sub.virtual_parent, rng)?;
        out.push(NesIndividual::new(c1));
        if out.len() < wanted {
            out.push(NesIndividual::new(c2));
        }
    }
    Ok(out)
}

/// Evolves the weights of `template` (which fixes the architecture) to
/// minimize the training-set error.
pub fn evolve(cfg: &NesConfig, template: &Network, train: &PatternSet, validation: &PatternSet) -> Result<NesRun> {
    cfg.validate()?;
    if template.hidden_count() != cfg.hidden_nodes {
        return Err(config(format!(
            "template has {} hidden nodes, configuration asks for {}",
            template.hidden_count(),
            cfg.hidden_nodes
        )));
    }
    if template.virtual_pairs().next().is_some() {
        return Err(config("template network must be fully connected"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut eval = Evaluator { scratch: template.clone(), train };
    let len = template.genome_len();

    let mut population: Vec<NesIndividual> = (0..cfg.population_size)
        .map(|_| NesIndividual::new((0..len).map(|_| uniform(&mut rng, cfg.init_range.0, cfg.init_range.1)).collect()))
        .collect();
    for ind in &mut population {
        eval.evaluate(ind)?;
    }
    population = sort_by_cost(population);

    let mut history = EvolutionHistory::default();
    let mut generations = 0;
    let reached = |pop: &[NesIndividual]| cfg.target_cost.is_some_and(|target| pop[0].cost.unwrap() <= target);
    while generations < cfg.max_generations && !reached(&population) {
        generations += 1;
        let subs = partition_subpopulations(&population, cfg.subpopulations, &mut rng)?;
        let mut children = Vec::with_capacity(cfg.population_size);
        for sub in &subs {
            children.extend(offspring(sub, &population, &mut rng)?);
        }
        for child in children.iter_mut() {
            let mutated = tvm_mutate(std::mem::replace(child, NesIndividual::new(Vec::new())), generations, cfg, &mut rng);
            *child = mutated;
            eval.evaluate(child)?;
        }
        population = alternate_generation(population, children)?;
        debug_assert!(population.iter().all(|ind| cfg.in_domain(&ind.genome)));

        let best = &population[0];
        let best_cost = best.cost.unwrap();
        let validation_error = error_percentage(eval.network(&best.genome)?, validation)?;
        history.records.push(GenerationRecord {
            generation: generations,
            best_error: best_cost,
            mean_error: population.iter().map(|i| i.cost.unwrap()).sum::<f64>() / population.len() as f64,
            best_connections: template.connection_count(),
            best_hidden: template.hidden_count(),
            best_train_error: best_cost,
            best_validation_error: validation_error,
            attempts: vec![
                Attempt { operator: Operator::Crossover, outcome: AttemptOutcome::Applied },
                Attempt { operator: Operator::Mutation, outcome: AttemptOutcome::Applied },
            ],
        });
    }

    let best = population[0].clone();
    let mut network = template.clone();
    network.load_genome(&best.genome)?;
    Ok(NesRun {
        cost: best.cost.unwrap(),
        genome: best.genome,
        network,
        history,
        generations,
        population,
    })
}

fn sort_by_cost(mut population: Vec<NesIndividual>) -> Vec<NesIndividual> {
    population.sort_by(|a, b| a.cost.unwrap().total_cmp(&b.cost.unwrap()));
    population
}
