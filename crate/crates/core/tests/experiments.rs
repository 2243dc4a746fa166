use std::path::Path;

use evonet::error::Error;
use evonet::experiment::{parse_config, run_experiment, Algorithm, ExperimentConfig};

const DATA: &str = "0.1,0.2,1\n0.9,0.8,2\n0.2,0.1,1\n0.8,0.9,2\n0.3,0.2,1\n0.7,0.9,2\n0.1,0.3,1\n0.9,0.7,2\n0.2,0.2,1\n0.8,0.8,2\n";
const SCHEMA: &str = "name = toy\ninputs = 2\nclasses = 2\nclass_col = 2\n";

fn setup(dir: &Path, algorithm: Algorithm, extra: &str) -> ExperimentConfig {
    std::fs::write(dir.join("toy.data"), DATA).unwrap();
    std::fs::write(dir.join("toy.schema"), SCHEMA).unwrap();
    let text = format!("train_count = 6\nvalidation_count = 2\ntest_count = 2\n{extra}");
    let (algorithm, split) = parse_config(algorithm, &text).unwrap();
    ExperimentConfig {
        algorithm,
        split,
        schema_path: dir.join("toy.schema"),
        data_path: dir.join("toy.data"),
        runs: 2,
        base_seed: 10,
        out_dir: dir.join("out"),
        dump_best: false,
    }
}

#[test]
fn zero_generations_give_header_only_histories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        runs: 1,
        ..setup(dir.path(), Algorithm::Nes, "hidden_nodes = 2\npopulation_size = 4\nsubpopulations = 2\nmax_generations = 0\n")
    };
    let out = run_experiment(&cfg).unwrap();
    let history = std::fs::read_to_string(cfg.out_dir.join("history_run0.csv")).unwrap();
    assert_eq!(history.lines().count(), 1);
    assert_eq!(out.report.runs.len(), 1);
    assert_eq!(out.report.runs[0].generations, 0);
    assert_eq!(out.report.stats("train_error").unwrap().sd, 0.0);
    for file in ["runs.csv", "aggregate.csv", "report.txt"] {
        assert!(cfg.out_dir.join(file).is_file(), "{file}");
    }
}

#[test]
fn runs_use_consecutive_seeds_and_dump_networks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        dump_best: true,
        ..setup(dir.path(), Algorithm::Epnet, "population_size = 4\ninitial_epochs = 5\ntraining_epochs = 5\nmax_generations = 5\nmax_hidden_nodes = 4\n")
    };
    let out = run_experiment(&cfg).unwrap();
    let seeds: Vec<u64> = out.report.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, vec![10, 11]);
    for k in 0..2 {
        let text = std::fs::read_to_string(cfg.out_dir.join(format!("best_net_run{k}.txt"))).unwrap();
        assert_eq!(evonet::network::Network::parse_dump(&text).unwrap(), out.outcomes[k].network);
    }
    let runs = std::fs::read_to_string(cfg.out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 3);
}

#[test]
fn failures_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = setup(dir.path(), Algorithm::Nes, "hidden_nodes = 2\npopulation_size = 4\nsubpopulations = 2\n");
    cfg.runs = 0;
    assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
    cfg.runs = 1;
    cfg.split.train_count = 60;
    assert!(matches!(run_experiment(&cfg), Err(Error::Dataset(_))));
    cfg.data_path = dir.path().join("missing.data");
    assert!(run_experiment(&cfg).is_err());
}
