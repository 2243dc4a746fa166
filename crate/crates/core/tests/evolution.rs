use evonet::dataset::{one_of_m, partition, SplitSpec, Splits};
use evonet::epnet::{self, EpnetConfig};
use evonet::experiment::nes_template;
use evonet::history::Operator;
use evonet::nes::{self, NesConfig};
use evonet::train::error_percentage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splits() -> Splits {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..120 {
        let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
        let class = if (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) < 0.1 { 1 } else { 2 };
        inputs.push(x);
        targets.push(one_of_m(class, 2).unwrap());
    }
    partition(&inputs, &targets, SplitSpec { train_count: 60, validation_count: 30, test_count: 30 }).unwrap()
}

#[test]
fn epnet_improves_on_its_initial_population() {
    let s = splits();
    let cfg = EpnetConfig {
        population_size: 10,
        initial_epochs: 10,
        training_epochs: 10,
        hidden_range: (1, 2),
        max_hidden_nodes: 6,
        max_generations: 80,
        final_training_epochs: 20,
        seed: 1,
        ..EpnetConfig::default()
    };
    let run = epnet::evolve(&cfg, &s.train, &s.validation).unwrap();
    let first = run.history.records.first().unwrap();
    let last = run.history.records.last().unwrap();
    assert!(last.best_error <= first.best_error);
    assert!(run.history.is_best_non_increasing());
    assert_eq!(run.generations, run.history.len());
    run.network.check_invariants().unwrap();
    // Every generation records at least one operator, and additions only
    // follow failed deletions.
    for rec in &run.history.records {
        assert!(!rec.attempts.is_empty());
        if rec.attempts[0].operator == Operator::Training {
            assert_eq!(rec.attempts.len(), 1);
        }
    }
}

#[test]
fn nes_reduces_training_error() {
    let s = splits();
    let cfg = NesConfig { hidden_nodes: 3, max_generations: 150, seed: 2, ..NesConfig::default() };
    let template = nes_template(&cfg, 3, 2).unwrap();
    let run = nes::evolve(&cfg, &template, &s.train, &s.validation).unwrap();
    assert_eq!(run.history.len(), 150);
    let first = run.history.records[0].best_error;
    assert!(run.cost < first, "{} !< {first}", run.cost);
    assert_eq!(error_percentage(&run.network, &s.train).unwrap(), run.cost);
    assert_eq!(run.network.flatten(), run.genome);
}

#[test]
fn configurations_are_checked_before_running() {
    let s = splits();
    let bad = EpnetConfig { hidden_range: (3, 2), ..EpnetConfig::default() };
    assert!(epnet::evolve(&bad, &s.train, &s.validation).is_err());
    let bad = NesConfig { population_size: 10, subpopulations: 4, ..NesConfig::default() };
    let template = nes_template(&NesConfig::default(), 3, 2).unwrap();
    assert!(nes::evolve(&bad, &template, &s.train, &s.validation).is_err());
}
