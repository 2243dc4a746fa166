//! Repeated seeded runs of either evolver on a prepared dataset.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::{misclassification_rate, parse_key_values, parse_value, Dataset, SplitSpec, Splits};
use crate::epnet::{self, EpnetConfig};
use crate::error::{config, io_err, Error, Result};
use crate::history::EvolutionHistory;
use crate::nes::{self, NesConfig, SigmaForm};
use crate::network::{random_network, BiasInit, Network, RandomNetworkParams};
use crate::report::{emit_history_csv, write_file, RunRecord, RunReport};
use crate::train::error_percentage;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    Epnet,
    Nes,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Epnet => "epnet",
            Algorithm::Nes => "nes",
        }
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "epnet" => Ok(Algorithm::Epnet),
            "nes" => Ok(Algorithm::Nes),
            other => Err(config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AlgorithmConfig {
    Epnet(EpnetConfig),
    Nes(NesConfig),
}

impl AlgorithmConfig {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            AlgorithmConfig::Epnet(_) => Algorithm::Epnet,
            AlgorithmConfig::Nes(_) => Algorithm::Nes,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            AlgorithmConfig::Epnet(c) => c.seed,
            AlgorithmConfig::Nes(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            AlgorithmConfig::Epnet(c) => AlgorithmConfig::Epnet(EpnetConfig { seed, ..c.clone() }),
            AlgorithmConfig::Nes(c) => AlgorithmConfig::Nes(NesConfig { seed, ..c.clone() }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            AlgorithmConfig::Epnet(c) => c.validate(),
            AlgorithmConfig::Nes(c) => c.validate(),
        }
    }
}

/// Key/value pairs still to be consumed; anything left over is an unknown key.
struct Keys(BTreeMap<String, String>);

impl Keys {
    fn set<T: FromStr>(&mut self, key: &str, field: &mut T) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            *field = parse_value(&v, key)?;
        }
        Ok(())
    }

    fn set_pair<T: FromStr>(&mut self, key: &str, field: &mut (T, T)) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            let parts: Vec<&str> = v.split(',').collect();
            if parts.len() != 2 {
                return Err(config(format!("`{key}` expects two comma-separated values")));
            }
            *field = (parse_value(parts[0], key)?, parse_value(parts[1], key)?);
        }
        Ok(())
    }

    fn required(&mut self, key: &str) -> Result<usize> {
        let v = self.0.remove(key).ok_or_else(|| config(format!("missing key `{key}`")))?;
        parse_value(&v, key)
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            Some(key) => Err(config(format!("unknown configuration key `{key}`"))),
            None => Ok(()),
        }
    }
}

/// Parses a flat `key = value` configuration for `algorithm`. Keys are the
/// field names of the algorithm's configuration (MBP constants are given at
/// top level) plus `train_count`, `validation_count` and `test_count`.
/// Missing keys keep their defaults; the split keys are required.
pub fn parse_config(algorithm: Algorithm, text: &str) -> Result<(AlgorithmConfig, SplitSpec)> {
    let mut keys = Keys(parse_key_values(text)?);
    let split = SplitSpec {
        train_count: keys.required("train_count")?,
        validation_count: keys.required("validation_count")?,
        test_count: keys.required("test_count")?,
    };
    let cfg = match algorithm {
        Algorithm::Epnet => {
            let mut c = EpnetConfig::default();
            keys.set("population_size", &mut c.population_size)?;
            keys.set("initial_epochs", &mut c.initial_epochs)?;
            keys.set("training_epochs", &mut c.training_epochs)?;
            keys.set("max_deleted_nodes", &mut c.max_deleted_nodes)?;
            keys.set("max_mutated_connections", &mut c.max_mutated_connections)?;
            keys.set_pair("hidden_range", &mut c.hidden_range)?;
            keys.set("max_hidden_nodes", &mut c.max_hidden_nodes)?;
            keys.set("density", &mut c.density)?;
            keys.set_pair("weight_init_range", &mut c.weight_init_range)?;
            if let Some(v) = keys.0.remove("bias_init") {
                c.bias_init = parse_bias(&v)?;
            }
            keys.set("learning_rate", &mut c.mbp.learning_rate)?;
            keys.set("rate_up", &mut c.mbp.rate_up)?;
            keys.set("rate_down", &mut c.mbp.rate_down)?;
            keys.set("rate_min", &mut c.mbp.rate_min)?;
            keys.set("rate_max", &mut c.mbp.rate_max)?;
            keys.set("shuffle", &mut c.mbp.shuffle)?;
            keys.set("train_bias", &mut c.mbp.train_bias)?;
            keys.set("success_threshold", &mut c.success_threshold)?;
            keys.set("stop_epsilon", &mut c.stop_epsilon)?;
            keys.set("stop_window", &mut c.stop_window)?;
            keys.set("max_generations", &mut c.max_generations)?;
            keys.set("final_training_epochs", &mut c.final_training_epochs)?;
            keys.set_pair("split_beta", &mut c.split_beta)?;
            keys.set("seed", &mut c.seed)?;
            AlgorithmConfig::Epnet(c)
        }
        Algorithm::Nes => {
            let mut c = NesConfig::default();
            keys.set("population_size", &mut c.population_size)?;
            keys.set("subpopulations", &mut c.subpopulations)?;
            keys.set("gamma", &mut c.gamma)?;
            keys.set("max_generations", &mut c.max_generations)?;
            keys.set_pair("genome_domain", &mut c.genome_domain)?;
            keys.set_pair("init_range", &mut c.init_range)?;
            keys.set("hidden_nodes", &mut c.hidden_nodes)?;
            if let Some(v) = keys.0.remove("sigma_form") {
                c.sigma_form = match v.as_str() {
                    "power" => SigmaForm::Power,
                    "coefficient" => SigmaForm::Coefficient,
                    other => return Err(config(format!("unknown sigma_form `{other}`"))),
                };
            }
            if let Some(v) = keys.0.remove("target_cost") {
                c.target_cost = if v == "none" { None } else { Some(parse_value(&v, "target_cost")?) };
            }
            keys.set("seed", &mut c.seed)?;
            AlgorithmConfig::Nes(c)
        }
    };
    keys.finish()?;
    cfg.validate()?;
    Ok((cfg, split))
}

/// A single number is a constant bias; `lo, hi` draws uniformly.
fn parse_bias(v: &str) -> Result<BiasInit> {
    match v.split_once(',') {
        Some((lo, hi)) => Ok(BiasInit::Uniform { lo: parse_value(lo, "bias_init")?, hi: parse_value(hi, "bias_init")? }),
        None => Ok(BiasInit::Constant(parse_value(v, "bias_init")?)),
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub history: EvolutionHistory,
    pub network: Network,
}

/// Fully connected template with `hidden` hidden nodes for NES.
pub fn nes_template(cfg: &NesConfig, inputs: usize, outputs: usize) -> Result<Network> {
    let params = RandomNetworkParams {
        inputs,
        outputs,
        max_hidden: cfg.hidden_nodes,
        hidden_range: (cfg.hidden_nodes, cfg.hidden_nodes),
        density: 1.0,
        weight_range: cfg.init_range,
        bias_init: BiasInit::Constant(0.0),
    };
    random_network(&params, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// One run with the seed already set in `cfg`.
pub fn run_single(cfg: &AlgorithmConfig, splits: &Splits) -> Result<RunOutcome> {
    let (network, history, generations) = match cfg {
        AlgorithmConfig::Epnet(c) => {
            let run = epnet::evolve(c, &splits.train, &splits.validation)?;
            (run.network, run.history, run.generations)
        }
        AlgorithmConfig::Nes(c) => {
            let template = nes_template(c, splits.train.input_dim(), splits.train.output_dim())?;
            let run = nes::evolve(c, &template, &splits.train, &splits.validation)?;
            (run.network, run.history, run.generations)
        }
    };
    let test_misclassification = misclassification_rate(&network, &splits.test)?;
    let record = RunRecord {
        seed: cfg.seed(),
        train_error: error_percentage(&network, &splits.train)?,
        validation_error: error_percentage(&network, &splits.validation)?,
        test_error: error_percentage(&network, &splits.test)?,
        validation_accuracy: 100.0 - misclassification_rate(&network, &splits.validation)?,
        test_accuracy: 100.0 - test_misclassification,
        test_misclassification,
        connections: network.connection_count(),
        hidden_nodes: network.hidden_count(),
        generations,
    };
    Ok(RunOutcome { record, history, network })
}

/// Runs seeds `base_seed + k` for `k` in `0..runs` in parallel. Results are
/// in run order. A failing or panicking run is reported with its index.
pub fn run_many(cfg: &AlgorithmConfig, splits: &Splits, runs: usize, base_seed: u64) -> Vec<Result<RunOutcome>> {
    (0..runs)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(k as u64);
            let run_cfg = cfg.with_seed(seed);
            match catch_unwind(AssertUnwindSafe(|| run_single(&run_cfg, splits))) {
                Ok(Ok(outcome)) => Ok(outcome),
                Ok(Err(e)) => Err(Error::Run { run: k, seed, message: e.to_string() }),
                Err(panic) => {
                    let message = panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "panic".to_string());
                    Err(Error::Run { run: k, seed, message })
                }
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmConfig,
    pub split: SplitSpec,
    pub schema_path: PathBuf,
    pub data_path: PathBuf,
    pub runs: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
    /// Also write each run's final network as `best_net_run<k>.txt`.
    pub dump_best: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(config("runs must be at least 1"));
        }
        for path in [&self.schema_path, &self.data_path] {
            if !path.is_file() {
                return Err(config(format!("{} does not exist", path.display())));
            }
        }
        self.algorithm.validate()
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: RunReport,
    pub outcomes: Vec<RunOutcome>,
}

/// Loads the data, executes the runs and writes `history_run<k>.csv`,
/// `runs.csv`, `aggregate.csv` and `report.txt` into the output directory.
/// When a run fails, the histories of the runs that finished are still
/// written before the error is returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dataset = Dataset::load(&cfg.schema_path, &cfg.data_path)?;
    let splits = dataset.partition(cfg.split)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;

    let results = run_many(&cfg.algorithm, &splits, cfg.runs, cfg.base_seed);
    let mut outcomes = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (k, result) in results.into_iter().enumerate() {
        match result {
            Ok(outcome) => {
                write_run_files(&cfg.out_dir, k, &outcome, cfg.dump_best)?;
                outcomes.push(outcome);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let records = outcomes.iter().map(|o| o.record.clone()).collect();
    let report = RunReport::new(cfg.algorithm.algorithm().name(), &dataset.name, records)?;
    report.emit(&cfg.out_dir)?;
    Ok(ExperimentOutput { report, outcomes })
}

fn write_run_files(dir: &Path, k: usize, outcome: &RunOutcome, dump: bool) -> Result<()> {
    emit_history_csv(&outcome.history, &dir.join(format!("history_run{k}.csv")))?;
    if dump {
        write_file(&dir.join(format!("best_net_run{k}.txt")), &outcome.network.dump())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPLIT: &str = "train_count = 10\nvalidation_count = 5\ntest_count = 5\n";

    #[test]
    fn parses_epnet_keys() {
        let text = format!("{SPLIT}population_size = 8\nhidden_range = 2, 8\nmax_hidden_nodes = 12\nbias_init = -1.5\nlearning_rate = 0.2\nsplit_beta = -0.4, 0.4\n");
        let (cfg, split) = parse_config(Algorithm::Epnet, &text).unwrap();
        assert_eq!(split.total(), 20);
        let AlgorithmConfig::Epnet(c) = cfg else { panic!() };
        assert_eq!(c.population_size, 8);
        assert_eq!(c.hidden_range, (2, 8));
        assert_eq!(c.bias_init, BiasInit::Constant(-1.5));
        assert_eq!(c.mbp.learning_rate, 0.2);
        assert_eq!(c.split_beta, (-0.4, 0.4));
        assert_eq!(c.training_epochs, EpnetConfig::default().training_epochs);
    }

    #[test]
    fn parses_nes_keys() {
        let text = format!("{SPLIT}subpopulations = 5\nsigma_form = coefficient\ntarget_cost = 0.5\ngenome_domain = -5, 5\n");
        let (cfg, _) = parse_config(Algorithm::Nes, &text).unwrap();
        let AlgorithmConfig::Nes(c) = cfg else { panic!() };
        assert_eq!(c.subpopulations, 5);
        assert_eq!(c.sigma_form, SigmaForm::Coefficient);
        assert_eq!(c.target_cost, Some(0.5));
        assert_eq!(c.genome_domain, (-5.0, 5.0));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse_config(Algorithm::Nes, &format!("{SPLIT}mutation_rate = 0.1\n")).is_err());
        assert!(parse_config(Algorithm::Epnet, &format!("{SPLIT}gamma = 8\n")).is_err());
        assert!(parse_config(Algorithm::Nes, "population_size = 20\n").is_err());
        assert!(parse_config(Algorithm::Nes, &format!("{SPLIT}subpopulations = 3\n")).is_err());
        assert!(parse_config(Algorithm::Epnet, &format!("{SPLIT}hidden_range = 3\n")).is_err());
        assert!("ga".parse::<Algorithm>().is_err());
    }
}
