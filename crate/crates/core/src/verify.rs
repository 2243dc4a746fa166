//! Self-checks: property checks that need no external data, and experiment
//! checks that run both evolvers on the bundled datasets.
//!
//! Each check returns a [`CheckResult`] carrying the measured values, so a
//! failing line says by how much it missed.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, SplitSpec, Splits};
use crate::epnet::{self, EpnetConfig};
use crate::error::Result;
use crate::experiment::{parse_config, run_experiment, run_many, Algorithm, AlgorithmConfig, ExperimentConfig, RunOutcome};
use crate::history::EvolutionHistory;
use crate::nes::{self, sbmac_with_alpha, tvm_mutate, tvm_sigma, NesConfig, NesIndividual};
use crate::network::{random_network, BiasInit, Network, RandomNetworkParams};
use crate::report::{emit_history_csv, read_history_csv};
use crate::train::{error_percentage, pattern_gradient, PatternSet};

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(id: usize, name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { id, name, passed, detail: detail.into() }
    }

    fn from_result(id: usize, name: &'static str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(id, name, passed, detail),
            Err(e) => Self::new(id, name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} {status} {}: {}", self.id, self.name, self.detail)
    }
}

fn small_random_net<R: Rng>(rng: &mut R, max_inputs: usize, max_hidden: usize, density: f64) -> Network {
    let params = RandomNetworkParams {
        inputs: rng.random_range(1..=max_inputs),
        outputs: rng.random_range(1..=3),
        max_hidden: max_hidden + 1,
        hidden_range: (1, max_hidden),
        density,
        weight_range: (-1.0, 1.0),
        bias_init: BiasInit::Uniform { lo: -1.0, hi: 1.0 },
    };
    random_network(&params, rng).expect("valid parameters")
}

fn random_vec<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

fn half_squared_error(net: &Network, x: &[f64], t: &[f64]) -> f64 {
    let y = net.forward(x).expect("matching dimensions");
    0.5 * y.iter().zip(t).map(|(y, t)| (t - y) * (t - y)).sum::<f64>()
}

/// Central difference of the per-pattern loss along one weight or bias.
fn central_difference(net: &Network, x: &[f64], t: &[f64], h: f64, param: Param) -> f64 {
    let mut plus = net.clone();
    let mut minus = net.clone();
    match param {
        Param::Weight(to, from) => {
            let w = net.weight(to, from);
            plus.connect(to, from, w + h).unwrap();
            minus.connect(to, from, w - h).unwrap();
        }
        Param::Bias(node) => {
            let b = net.bias(node);
            plus.set_bias(node, b + h);
            minus.set_bias(node, b - h);
        }
    }
    (half_squared_error(&plus, x, t) - half_squared_error(&minus, x, t)) / (2.0 * h)
}

#[derive(Clone, Copy)]
enum Param {
    Weight(usize, usize),
    Bias(usize),
}

/// Relative difference with a floor on the denominator, so gradients that
/// are zero up to rounding compare as equal.
fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Analytic gradients against central differences (h = 1e-5), tolerance
/// 1e-5 relative, on 50 random networks with at most 3 hidden nodes and 5
/// inputs. Virtual pairs are included.
pub fn check_gradients() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst, mut checked) = (0.0f64, 0usize);
    for _ in 0..50 {
        let density = rng.random_range(0.3..=1.0);
        let net = small_random_net(&mut rng, 5, 3, density);
        for _ in 0..4 {
            let x = random_vec(&mut rng, net.inputs(), -1.0, 1.0);
            let t = random_vec(&mut rng, net.outputs(), 0.0, 1.0);
            let g = pattern_gradient(&net, &x, &t).expect("dimensions match");
            let d = net.node_count();
            for (to, from) in net.legal_pairs() {
                let fd = central_difference(&net, &x, &t, 1e-5, Param::Weight(to, from));
                worst = worst.max(relative_error(g.weights[to * d + from], fd));
                checked += 1;
            }
            for node in net.computing_nodes() {
                let fd = central_difference(&net, &x, &t, 1e-5, Param::Bias(node));
                worst = worst.max(relative_error(g.bias[node - net.inputs()], fd));
                checked += 1;
            }
        }
    }
    CheckResult::new(
        1,
        "gradient correctness",
        worst <= 1e-5,
        format!("{checked} partials, worst relative error {worst:.3e} (tolerance 1e-5)"),
    )
}

/// The error measure recomputed with a plain double loop.
fn error_oracle(net: &Network, inputs: &[Vec<f64>], targets: &[Vec<f64>], o_min: f64, o_max: f64) -> f64 {
    let mut sum = 0.0;
    for p in 0..inputs.len() {
        let y = net.forward(&inputs[p]).unwrap();
        for i in 0..y.len() {
            sum += (y[i] - targets[p][i]) * (y[i] - targets[p][i]);
        }
    }
    100.0 * (o_max - o_min) / (inputs.len() as f64 * targets[0].len() as f64) * sum
}

/// Error measure against the double-loop oracle, tolerance 1e-12 relative
/// to max(1, |oracle|), on 100 random instances.
pub fn check_error_measure() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let density = rng.random_range(0.2..=1.0);
        let net = small_random_net(&mut rng, 6, 4, density);
        let rows = rng.random_range(1..30);
        let o_min = rng.random_range(-1.0..0.5);
        let o_max = o_min + rng.random_range(0.1..2.0);
        let inputs: Vec<Vec<f64>> = (0..rows).map(|_| random_vec(&mut rng, net.inputs(), -2.0, 2.0)).collect();
        let targets: Vec<Vec<f64>> = (0..rows).map(|_| random_vec(&mut rng, net.outputs(), o_min, o_max)).collect();
        let oracle = error_oracle(&net, &inputs, &targets, o_min, o_max);
        let set = PatternSet::new(inputs, targets, o_min, o_max).unwrap();
        let e = error_percentage(&net, &set).unwrap();
        worst = worst.max((e - oracle).abs() / oracle.abs().max(1.0));
    }
    CheckResult::new(2, "error measure oracle", worst <= 1e-12, format!("100 instances, worst deviation {worst:.3e} (tolerance 1e-12)"))
}

/// Forward outputs before and after node splitting on 50 random networks,
/// 100 inputs each, tolerance 1e-9.
pub fn check_split_preservation() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let density = rng.random_range(0.3..=1.0);
        let net = small_random_net(&mut rng, 5, 3, density);
        let split = epnet::split_node(&net, &mut rng, (-1.0, 1.0)).expect("a free hidden slot");
        for _ in 0..100 {
            let x = random_vec(&mut rng, net.inputs(), -3.0, 3.0);
            let (a, b) = (net.forward(&x).unwrap(), split.forward(&x).unwrap());
            for (u, v) in a.iter().zip(&b) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    CheckResult::new(3, "split-node preservation", worst <= 1e-9, format!("5000 comparisons, worst |Δ| {worst:.3e} (tolerance 1e-9)"))
}

/// Pair-sum conservation (exact) and hull membership over 1000 random
/// crossovers.
pub fn check_crossover() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut broken_sums, mut outside) = (0usize, 0usize);
    for _ in 0..1000 {
        let len = rng.random_range(1..60);
        let scale = 10f64.powi(rng.random_range(-3..3));
        let e = random_vec(&mut rng, len, -scale, scale);
        let v = random_vec(&mut rng, len, -scale, scale);
        let alpha = random_vec(&mut rng, len, 0.0, 1.0);
        let (c1, c2) = sbmac_with_alpha(&e, &v, &alpha).unwrap();
        for i in 0..len {
            broken_sums += usize::from(c1[i] + c2[i] != e[i] + v[i]);
            let (lo, hi) = (e[i].min(v[i]), e[i].max(v[i]));
            outside += usize::from(!(lo..=hi).contains(&c1[i]) || !(lo..=hi).contains(&c2[i]));
        }
    }
    CheckResult::new(
        4,
        "crossover conservation",
        broken_sums == 0 && outside == 0,
        format!("1000 pairs, {broken_sums} sums differ, {outside} children outside the hull"),
    )
}

/// Step size vanishes at the last generation, mutation there is the
/// identity, and a step leaving the domain leaves the child unmutated.
pub fn check_tvm_boundary() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut failures = Vec::new();
    let cfg = NesConfig { max_generations: 500, ..NesConfig::default() };
    let rs: Vec<f64> = [0.0, 1e-300, 0.25, 0.5, 0.999, 1.0].into_iter().chain((0..1000).map(|_| rng.random::<f64>())).collect();
    if rs.into_iter().any(|r| tvm_sigma(500, &cfg, r) != 0.0) {
        failures.push("σ(T) ≠ 0");
    }
    let child = NesIndividual::new(random_vec(&mut rng, 40, -0.5, 0.5));
    if (0..200).any(|_| tvm_mutate(child.clone(), 500, &cfg, &mut rng) != child) {
        failures.push("mutation at T changed the child");
    }
    let tight = NesConfig { genome_domain: (-1.0, 1.0), init_range: (-1.0, 1.0), ..cfg };
    let edge = NesIndividual::new(vec![1.0; 40]);
    let mut violated = 0;
    for _ in 0..200 {
        let out = tvm_mutate(edge.clone(), 1, &tight, &mut rng);
        if out != edge {
            if out.genome.iter().any(|x| !(-1.0..=1.0).contains(x)) {
                failures.push("mutated child left the domain");
                break;
            }
        } else {
            violated += 1;
        }
    }
    if violated == 0 {
        failures.push("no domain violation was exercised");
    }
    let passed = failures.is_empty();
    let detail = if passed {
        format!("σ(T) = 0 for 1006 draws; 200 final mutations unchanged; {violated}/200 boundary children left unmutated")
    } else {
        failures.join("; ")
    };
    CheckResult::new(5, "time-variant mutation boundary", passed, detail)
}

/// Two-class synthetic problem used by the data-free checks.
fn synthetic_rows(seed: u64, rows: usize) -> Vec<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..rows)
        .map(|_| {
            let x = random_vec(&mut rng, 4, 0.0, 1.0);
            let class = if x[0] * x[1] + 0.3 * x[2] > 0.4 { 2 } else { 1 };
            (x, class)
        })
        .collect()
}

fn synthetic_splits() -> Splits {
    let rows = synthetic_rows(7, 90);
    let inputs: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let targets: Vec<Vec<f64>> = rows.iter().map(|r| crate::dataset::one_of_m(r.1, 2).unwrap()).collect();
    crate::dataset::partition(&inputs, &targets, SplitSpec { train_count: 50, validation_count: 20, test_count: 20 }).unwrap()
}

fn small_epnet(seed: u64) -> EpnetConfig {
    EpnetConfig {
        population_size: 8,
        initial_epochs: 10,
        training_epochs: 5,
        hidden_range: (1, 3),
        max_hidden_nodes: 6,
        max_generations: 60,
        final_training_epochs: 10,
        seed,
        ..EpnetConfig::default()
    }
}

/// Best-error column never increases and the population size is constant,
/// for a 100-generation NES run and EPNet runs on synthetic data.
pub fn check_elitism() -> CheckResult {
    CheckResult::from_result(6, "elitism", (|| {
        let splits = synthetic_splits();
        let nes_cfg = NesConfig { hidden_nodes: 3, max_generations: 100, seed: 3, ..NesConfig::default() };
        let template = crate::experiment::nes_template(&nes_cfg, 4, 2)?;
        let nes_run = nes::evolve(&nes_cfg, &template, &splits.train, &splits.validation)?;
        let mut ok = nes_run.history.len() == 100
            && nes_run.history.is_best_non_increasing()
            && nes_run.population.len() == nes_cfg.population_size;
        let mut epnet_generations = Vec::new();
        for seed in 0..3 {
            let cfg = small_epnet(seed);
            let run = epnet::evolve(&cfg, &splits.train, &splits.validation)?;
            ok &= run.history.is_best_non_increasing() && run.population.len() == cfg.population_size;
            epnet_generations.push(run.generations);
        }
        Ok((ok, format!("NES 100 generations μ = 20; EPNet runs of {epnet_generations:?} generations M = 8")))
    })())
}

static SCRATCH: AtomicUsize = AtomicUsize::new(0);

/// A fresh directory under the system temporary directory, removed on drop.
struct ScratchDir(PathBuf);

impl ScratchDir {
    fn new() -> std::io::Result<Self> {
        let n = SCRATCH.fetch_add(1, Ordering::Relaxed);
        let dir = std::env::temp_dir().join(format!("evonet-verify-{}-{n}", std::process::id()));
        std::fs::create_dir_all(&dir)?;
        Ok(Self(dir))
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

fn read_dir_sorted(dir: &Path) -> std::io::Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        files.push((entry.file_name().to_string_lossy().into_owned(), std::fs::read(entry.path())?));
    }
    files.sort();
    Ok(files)
}

/// Two experiments with the same configuration and seeds write
/// byte-identical files.
pub fn check_determinism() -> CheckResult {
    CheckResult::from_result(7, "determinism", (|| {
        let scratch = ScratchDir::new().map_err(crate::error::io_err(std::env::temp_dir()))?;
        let root = &scratch.0;
        let mut csv = String::new();
        for (x, class) in synthetic_rows(11, 90) {
            let cells: Vec<String> = x.iter().map(f64::to_string).collect();
            csv.push_str(&format!("{},{class}\n", cells.join(",")));
        }
        std::fs::write(root.join("toy.data"), csv).map_err(crate::error::io_err(root))?;
        std::fs::write(root.join("toy.schema"), "name = toy\ninputs = 4\nclasses = 2\nclass_col = 4\n")
            .map_err(crate::error::io_err(root))?;
        let split = SplitSpec { train_count: 50, validation_count: 20, test_count: 20 };
        let mut compared = 0;
        let mut identical = true;
        for algorithm in [
            AlgorithmConfig::Epnet(small_epnet(0)),
            AlgorithmConfig::Nes(NesConfig { hidden_nodes: 3, max_generations: 50, ..NesConfig::default() }),
        ] {
            let mut outputs = Vec::new();
            for copy in 0..2 {
                let out_dir = root.join(format!("{}-{copy}", algorithm.algorithm().name()));
                run_experiment(&ExperimentConfig {
                    algorithm: algorithm.clone(),
                    split,
                    schema_path: root.join("toy.schema"),
                    data_path: root.join("toy.data"),
                    runs: 3,
                    base_seed: 5,
                    out_dir: out_dir.clone(),
                    dump_best: true,
                })?;
                outputs.push(read_dir_sorted(&out_dir).map_err(crate::error::io_err(&out_dir))?);
            }
            compared += outputs[0].len();
            identical &= outputs[0] == outputs[1];
        }
        Ok((identical, format!("{compared} files compared across two EPNet and two NES experiments")))
    })())
}

/// Criteria 1–7.
pub fn invariants_suite() -> Vec<CheckResult> {
    vec![
        check_gradients(),
        check_error_measure(),
        check_split_preservation(),
        check_crossover(),
        check_tvm_boundary(),
        check_elitism(),
        check_determinism(),
    ]
}

/// Runs per configuration in the experiment checks.
pub const ACCEPTANCE_RUNS: usize = 5;
/// Base seed of the experiment checks.
pub const ACCEPTANCE_SEED: u64 = 0;

/// Runs of both evolvers on diabetes and breast cancer, shared by the
/// experiment checks.
#[derive(Clone, Debug)]
pub struct ExperimentRuns {
    pub epnet_diabetes: Vec<RunOutcome>,
    pub nes_diabetes: Vec<RunOutcome>,
    pub epnet_cancer: Vec<RunOutcome>,
    pub nes_cancer: Vec<RunOutcome>,
}

impl ExperimentRuns {
    /// Loads `data/` and `configs/` under `root` and executes
    /// [`ACCEPTANCE_RUNS`] runs of each configuration.
    pub fn compute(root: &Path) -> Result<Self> {
        let load = |stem: &str, conf: &str, algorithm: Algorithm| -> Result<(AlgorithmConfig, Splits)> {
            let data = Dataset::load(root.join(format!("data/{stem}.schema")), root.join(format!("data/{stem}.data")))?;
            let path = root.join(format!("configs/{conf}.conf"));
            let text = std::fs::read_to_string(&path).map_err(crate::error::io_err(&path))?;
            let (cfg, split) = parse_config(algorithm, &text)?;
            Ok((cfg, data.partition(split)?))
        };
        let jobs = [
            load("pima-indians-diabetes", "epnet-diabetes", Algorithm::Epnet)?,
            load("pima-indians-diabetes", "nes-diabetes", Algorithm::Nes)?,
            load("breast-cancer-wisconsin", "epnet-breast-cancer", Algorithm::Epnet)?,
            load("breast-cancer-wisconsin", "nes-breast-cancer", Algorithm::Nes)?,
        ];
        let mut results = Vec::with_capacity(4);
        for (cfg, splits) in &jobs {
            let runs: Result<Vec<RunOutcome>> = run_many(cfg, splits, ACCEPTANCE_RUNS, ACCEPTANCE_SEED).into_iter().collect();
            results.push(runs?);
        }
        let mut it = results.into_iter();
        Ok(Self {
            epnet_diabetes: it.next().unwrap(),
            nes_diabetes: it.next().unwrap(),
            epnet_cancer: it.next().unwrap(),
            nes_cancer: it.next().unwrap(),
        })
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt_values(values: impl Iterator<Item = f64>) -> String {
    values.map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

/// Mean test misclassification on diabetes: EPNet in [18, 32] %, NES in
/// [19, 33] %.
pub fn check_diabetes_misclassification(runs: &ExperimentRuns) -> CheckResult {
    let e = mean(runs.epnet_diabetes.iter().map(|o| o.record.test_misclassification));
    let n = mean(runs.nes_diabetes.iter().map(|o| o.record.test_misclassification));
    CheckResult::new(
        8,
        "diabetes test misclassification",
        (18.0..=32.0).contains(&e) && (19.0..=33.0).contains(&n),
        format!("EPNet mean {e:.2}% (band 18–32), NES mean {n:.2}% (band 19–33)"),
    )
}

/// Mean final training error: breast cancer ≤ 0.05 for both evolvers,
/// diabetes NES ≤ 0.03.
pub fn check_training_error(runs: &ExperimentRuns) -> CheckResult {
    let train = |v: &[RunOutcome]| mean(v.iter().map(|o| o.record.train_error));
    let (ec, nc, nd) = (train(&runs.epnet_cancer), train(&runs.nes_cancer), train(&runs.nes_diabetes));
    CheckResult::new(
        9,
        "training error magnitude",
        ec <= 0.05 && nc <= 0.05 && nd <= 0.03,
        format!(
            "breast cancer EPNet mean {ec:.4} [{}], NES mean {nc:.4} [{}] (limit 0.05); diabetes NES mean {nd:.4} [{}] (limit 0.03)",
            fmt_values(runs.epnet_cancer.iter().map(|o| o.record.train_error)),
            fmt_values(runs.nes_cancer.iter().map(|o| o.record.train_error)),
            fmt_values(runs.nes_diabetes.iter().map(|o| o.record.train_error)),
        ),
    )
}

/// Every breast-cancer EPNet run ends with 1–6 hidden nodes and 8–40
/// connections.
pub fn check_architecture(runs: &ExperimentRuns) -> CheckResult {
    let hidden: Vec<usize> = runs.epnet_cancer.iter().map(|o| o.record.hidden_nodes).collect();
    let conns: Vec<usize> = runs.epnet_cancer.iter().map(|o| o.record.connections).collect();
    CheckResult::new(
        10,
        "architecture plausibility",
        hidden.iter().all(|h| (1..=6).contains(h)) && conns.iter().all(|c| (8..=40).contains(c)),
        format!("hidden nodes {hidden:?} (band 1–6), connections {conns:?} (band 8–40)"),
    )
}

fn best_at(history: &EvolutionHistory, generation: usize) -> Option<f64> {
    history.record(generation).map(|r| r.best_error)
}

/// In every NES diabetes run the best training error at generation 100 is
/// at least 30 % below its generation-10 value, and the emitted EPNet and
/// NES history files read back with both error columns.
pub fn check_nes_decay(runs: &ExperimentRuns) -> CheckResult {
    CheckResult::from_result(11, "NES fast decay", (|| {
        let mut ratios = Vec::new();
        for o in &runs.nes_diabetes {
            match (best_at(&o.history, 10), best_at(&o.history, 100)) {
                (Some(g10), Some(g100)) => ratios.push(g100 / g10),
                _ => return Ok((false, "history shorter than 100 generations".to_string())),
            }
        }
        let decayed = ratios.iter().all(|&r| r <= 0.7);

        let scratch = ScratchDir::new().map_err(crate::error::io_err(std::env::temp_dir()))?;
        let mut readable = true;
        for (name, outcome) in [("epnet", &runs.epnet_diabetes[0]), ("nes", &runs.nes_diabetes[0])] {
            let path = scratch.0.join(format!("{name}.csv"));
            emit_history_csv(&outcome.history, &path)?;
            readable &= read_history_csv(&path)? == outcome.history;
        }
        Ok((
            decayed && readable,
            format!(
                "gen-100 / gen-10 best training error per run [{}] (limit 0.70); history files round-trip: {readable}",
                fmt_values(ratios.into_iter())
            ),
        ))
    })())
}

/// Criteria 1–11. Criteria 8–11 run the evolvers on the data under `root`.
pub fn acceptance_suite(root: &Path) -> Vec<CheckResult> {
    let mut results = invariants_suite();
    match ExperimentRuns::compute(root) {
        Ok(runs) => {
            results.push(check_diabetes_misclassification(&runs));
            results.push(check_training_error(&runs));
            results.push(check_architecture(&runs));
            results.push(check_nes_decay(&runs));
        }
        Err(e) => {
            for (id, name) in [
                (8, "diabetes test misclassification"),
                (9, "training error magnitude"),
                (10, "architecture plausibility"),
                (11, "NES fast decay"),
            ] {
                results.push(CheckResult::new(id, name, false, format!("experiments failed: {e}")));
            }
        }
    }
    results
}
