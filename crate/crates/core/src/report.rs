//! Per-run records, aggregate statistics and their CSV/text forms.
//!
//! Floating-point values are written with Rust's shortest round-trip
//! formatting, so parsing an emitted file gives back identical values.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{csv_err, io_err, Error, Result};
use crate::history::{Attempt, AttemptOutcome, EvolutionHistory, GenerationRecord, Operator};

pub const HISTORY_HEADER: [&str; 8] = [
    "generation",
    "best_error",
    "mean_error",
    "best_connections",
    "best_hidden",
    "best_train_error",
    "best_validation_error",
    "attempts",
];

/// Final metrics of one run. Errors are the normalized squared-error
/// percentage; accuracy and misclassification are percentages of patterns.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub train_error: f64,
    pub validation_error: f64,
    pub test_error: f64,
    pub validation_accuracy: f64,
    pub test_accuracy: f64,
    pub test_misclassification: f64,
    pub connections: usize,
    pub hidden_nodes: usize,
    pub generations: usize,
}

impl RunRecord {
    pub const METRICS: [&'static str; 9] = [
        "train_error",
        "validation_error",
        "test_error",
        "validation_accuracy",
        "test_accuracy",
        "test_misclassification",
        "connections",
        "hidden_nodes",
        "generations",
    ];

    pub fn metrics(&self) -> [f64; 9] {
        [
            self.train_error,
            self.validation_error,
            self.test_error,
            self.validation_accuracy,
            self.test_accuracy,
            self.test_misclassification,
            self.connections as f64,
            self.hidden_nodes as f64,
            self.generations as f64,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single row.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

/// Column-wise statistics over equally long rows.
pub fn aggregate(rows: &[Vec<f64>]) -> Result<Vec<SummaryStats>> {
    let first = rows.first().ok_or_else(|| Error::Dataset("cannot aggregate zero rows".into()))?;
    if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
        return Err(Error::Dimension { context: "aggregate row width", expected: first.len(), found: bad.len() });
    }
    let n = rows.len() as f64;
    Ok((0..first.len())
        .map(|c| {
            let column = rows.iter().map(|r| r[c]);
            let mean = column.clone().sum::<f64>() / n;
            let sd = if rows.len() > 1 {
                (column.clone().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            SummaryStats {
                mean,
                sd,
                min: column.clone().fold(f64::INFINITY, f64::min),
                max: column.fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub algorithm: String,
    pub dataset: String,
    pub runs: Vec<RunRecord>,
    /// One entry per name in [`RunRecord::METRICS`].
    pub summary: Vec<SummaryStats>,
}

impl RunReport {
    pub fn new(algorithm: impl Into<String>, dataset: impl Into<String>, runs: Vec<RunRecord>) -> Result<Self> {
        let rows: Vec<Vec<f64>> = runs.iter().map(|r| r.metrics().to_vec()).collect();
        let summary = aggregate(&rows)?;
        Ok(Self { algorithm: algorithm.into(), dataset: dataset.into(), runs, summary })
    }

    pub fn stats(&self, metric: &str) -> Option<SummaryStats> {
        RunRecord::METRICS.iter().position(|m| *m == metric).map(|k| self.summary[k])
    }

    pub fn runs_csv(&self) -> String {
        let mut out = String::from("run,seed");
        for m in RunRecord::METRICS {
            write!(out, ",{m}").unwrap();
        }
        out.push('\n');
        for (k, r) in self.runs.iter().enumerate() {
            writeln!(
                out,
                "{k},{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                r.train_error,
                r.validation_error,
                r.test_error,
                r.validation_accuracy,
                r.test_accuracy,
                r.test_misclassification,
                r.connections,
                r.hidden_nodes,
                r.generations
            )
            .unwrap();
        }
        out
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("metric,mean,sd,min,max\n");
        for (m, s) in RunRecord::METRICS.iter().zip(&self.summary) {
            writeln!(out, "{m},{},{},{},{}", s.mean, s.sd, s.min, s.max).unwrap();
        }
        out
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "algorithm: {}", self.algorithm).unwrap();
        writeln!(out, "dataset:   {}", self.dataset).unwrap();
        writeln!(out, "runs:      {}", self.runs.len()).unwrap();
        writeln!(out).unwrap();
        writeln!(out, "{:<24}{:>14}{:>14}{:>14}{:>14}", "metric", "mean", "sd", "min", "max").unwrap();
        for (m, s) in RunRecord::METRICS.iter().zip(&self.summary) {
            writeln!(out, "{m:<24}{:>14.6}{:>14.6}{:>14.6}{:>14.6}", s.mean, s.sd, s.min, s.max).unwrap();
        }
        out
    }

    /// Writes `runs.csv`, `aggregate.csv` and `report.txt` into `dir`.
    pub fn emit(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("runs.csv"), &self.runs_csv())?;
        write_file(&dir.join("aggregate.csv"), &self.aggregate_csv())?;
        write_file(&dir.join("report.txt"), &self.render_text())
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(io_err(path))
}

pub fn history_csv(history: &EvolutionHistory) -> String {
    let mut out = HISTORY_HEADER.join(",");
    out.push('\n');
    for r in &history.records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.generation,
            r.best_error,
            r.mean_error,
            r.best_connections,
            r.best_hidden,
            r.best_train_error,
            r.best_validation_error,
            r.attempts_label()
        )
        .unwrap();
    }
    out
}

pub fn emit_history_csv(history: &EvolutionHistory, path: &Path) -> Result<()> {
    write_file(path, &history_csv(history))
}

/// Reads a file written by [`emit_history_csv`].
pub fn read_history_csv(path: &Path) -> Result<EvolutionHistory> {
    let source = path.display().to_string();
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(HISTORY_HEADER) {
        return Err(Error::Parse { path: source, row: 0, column: 0, message: "unexpected header".into() });
    }
    let mut history = EvolutionHistory::default();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let bad = |column: usize| Error::Parse {
            path: source.clone(),
            row: n + 1,
            column: column + 1,
            message: format!("cannot parse `{}`", &rec[column]),
        };
        let float = |c: usize| rec[c].parse::<f64>().map_err(|_| bad(c));
        let int = |c: usize| rec[c].parse::<usize>().map_err(|_| bad(c));
        let attempts = parse_attempts(&rec[7]).ok_or_else(|| bad(7))?;
        history.records.push(GenerationRecord {
            generation: int(0)?,
            best_error: float(1)?,
            mean_error: float(2)?,
            best_connections: int(3)?,
            best_hidden: int(4)?,
            best_train_error: float(5)?,
            best_validation_error: float(6)?,
            attempts,
        });
    }
    Ok(history)
}

fn parse_attempts(label: &str) -> Option<Vec<Attempt>> {
    if label == "-" {
        return Some(Vec::new());
    }
    label
        .split('+')
        .map(|part| {
            let (op, outcome) = part.split_once(':')?;
            Some(Attempt { operator: Operator::from_label(op)?, outcome: AttemptOutcome::from_label(outcome)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, x: f64) -> RunRecord {
        RunRecord {
            seed,
            train_error: x,
            validation_error: x,
            test_error: x,
            validation_accuracy: 100.0 - x,
            test_accuracy: 100.0 - x,
            test_misclassification: x,
            connections: 10,
            hidden_nodes: 2,
            generations: 5,
        }
    }

    #[test]
    fn aggregate_hand_values() {
        let s = aggregate(&[vec![2.0], vec![4.0]]).unwrap()[0];
        assert_eq!((s.mean, s.min, s.max), (3.0, 2.0, 4.0));
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-15);
        let s = aggregate(&[vec![7.5]]).unwrap()[0];
        assert_eq!((s.mean, s.sd), (7.5, 0.0));
        let s = aggregate(&[vec![1.0], vec![1.0], vec![1.0]]).unwrap()[0];
        assert_eq!(s.sd, 0.0);
        assert!(aggregate(&[]).is_err());
        assert!(aggregate(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn report_tables() {
        let report = RunReport::new("epnet", "toy", vec![record(0, 1.0), record(1, 3.0)]).unwrap();
        let runs = report.runs_csv();
        assert_eq!(runs.lines().count(), 3);
        assert!(runs.starts_with("run,seed,train_error,"));
        let agg = report.aggregate_csv();
        assert_eq!(agg.lines().count(), 1 + RunRecord::METRICS.len());
        assert!(agg.contains("train_error,2,1.4142135623730951,1,3\n"));
        assert_eq!(report.stats("connections").unwrap().sd, 0.0);
        for s in &report.summary {
            assert!(s.min <= s.mean && s.mean <= s.max);
        }
    }

    #[test]
    fn history_round_trip() {
        let mut h = EvolutionHistory::default();
        for g in 1..=3 {
            h.records.push(GenerationRecord {
                generation: g,
                best_error: 1.0 / g as f64,
                mean_error: 0.1 + 1.0 / 3.0,
                best_connections: 12,
                best_hidden: 2,
                best_train_error: std::f64::consts::PI,
                best_validation_error: 1e-300,
                attempts: if g == 2 {
                    Vec::new()
                } else {
                    vec![
                        Attempt { operator: Operator::NodeDeletion, outcome: AttemptOutcome::Skipped },
                        Attempt { operator: Operator::ConnectionDeletion, outcome: AttemptOutcome::Accepted },
                    ]
                },
            });
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        emit_history_csv(&h, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_history_csv(&path).unwrap(), h);

        emit_history_csv(&EvolutionHistory::default(), &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    }

    #[test]
    fn emit_reports_bad_path() {
        let report = RunReport::new("nes", "toy", vec![record(0, 1.0)]).unwrap();
        let err = report.emit(Path::new("/nonexistent/dir")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
