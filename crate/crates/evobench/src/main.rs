use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use evonet::experiment::{parse_config, run_experiment, Algorithm, ExperimentConfig};
use evonet::verify::{acceptance_suite, invariants_suite};

#[derive(Parser)]
#[command(name = "evobench", version, about = "Run and verify EPNet and NES experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute seeded runs and write history, run and report files.
    Run {
        #[arg(long, value_enum)]
        algo: Algo,
        /// Comma-separated data file.
        #[arg(long)]
        data: PathBuf,
        /// Dataset schema file.
        #[arg(long)]
        schema: PathBuf,
        /// Algorithm configuration file (key = value).
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 30)]
        runs: usize,
        /// Base seed; run k uses seed + k.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write each run's final network.
        #[arg(long)]
        dump_best: bool,
    },
    /// Run a check suite and print one line per criterion.
    Verify {
        #[arg(long, value_enum)]
        suite: Suite,
        /// Repository root holding `data/` and `configs/`.
        #[arg(long, default_value = ".")]
        root: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Epnet,
    Nes,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Invariants,
    Acceptance,
}

fn main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { algo, data, schema, config, runs, seed, out, dump_best } => {
            let algorithm = match algo {
                Algo::Epnet => Algorithm::Epnet,
                Algo::Nes => Algorithm::Nes,
            };
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let (algorithm, split) = parse_config(algorithm, &text).with_context(|| format!("in {}", config.display()))?;
            let cfg = ExperimentConfig {
                algorithm,
                split,
                schema_path: schema,
                data_path: data,
                runs,
                base_seed: seed,
                out_dir: out,
                dump_best,
            };
            let output = run_experiment(&cfg)?;
            print!("{}", output.report.render_text());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { suite, root } => {
            let results = match suite {
                Suite::Invariants => invariants_suite(),
                Suite::Acceptance => acceptance_suite(&root),
            };
            for r in &results {
                println!("{r}");
            }
            let ok = results.iter().all(|r| r.passed);
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
