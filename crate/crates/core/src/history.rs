//! Per-generation records shared by both evolvers.

use std::fmt;

/// Variation operators, in the order EPNet tries them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operator {
    Training,
    NodeDeletion,
    ConnectionDeletion,
    ConnectionAddition,
    NodeAddition,
    Crossover,
    Mutation,
}

impl Operator {
    pub fn label(self) -> &'static str {
        match self {
            Operator::Training => "training",
            Operator::NodeDeletion => "node-deletion",
            Operator::ConnectionDeletion => "connection-deletion",
            Operator::ConnectionAddition => "connection-addition",
            Operator::NodeAddition => "node-addition",
            Operator::Crossover => "sbmac",
            Operator::Mutation => "tvm",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.label() == label)
    }

    const ALL: [Operator; 7] = [
        Operator::Training,
        Operator::NodeDeletion,
        Operator::ConnectionDeletion,
        Operator::ConnectionAddition,
        Operator::NodeAddition,
        Operator::Crossover,
        Operator::Mutation,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttemptOutcome {
    /// Offspring entered the population.
    Accepted,
    /// Offspring was produced and discarded.
    Rejected,
    /// Operator was not applicable to the parent.
    Skipped,
    /// Applied to every offspring (NES).
    Applied,
}

impl AttemptOutcome {
    fn label(self) -> &'static str {
        match self {
            AttemptOutcome::Accepted => "accepted",
            AttemptOutcome::Rejected => "rejected",
            AttemptOutcome::Skipped => "skipped",
            AttemptOutcome::Applied => "applied",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        [Self::Accepted, Self::Rejected, Self::Skipped, Self::Applied]
            .into_iter()
            .find(|o| o.label() == label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Attempt {
    pub operator: Operator,
    pub outcome: AttemptOutcome,
}

impl fmt::Display for Attempt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.operator.label(), self.outcome.label())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Error the algorithm selects on: validation error for EPNet, training
    /// error for NES.
    pub best_error: f64,
    pub mean_error: f64,
    pub best_connections: usize,
    pub best_hidden: usize,
    pub best_train_error: f64,
    pub best_validation_error: f64,
    pub attempts: Vec<Attempt>,
}

impl GenerationRecord {
    /// Attempts joined as `op:outcome+op:outcome`, or `-` when empty.
    pub fn attempts_label(&self) -> String {
        if self.attempts.is_empty() {
            "-".to_string()
        } else {
            self.attempts.iter().map(ToString::to_string).collect::<Vec<_>>().join("+")
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolutionHistory {
    pub records: Vec<GenerationRecord>,
}

impl EvolutionHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.best_error)
    }

    /// Whether the best-error column never increases.
    pub fn is_best_non_increasing(&self) -> bool {
        self.records.windows(2).all(|w| w[1].best_error <= w[0].best_error)
    }

    pub fn record(&self, generation: usize) -> Option<&GenerationRecord> {
        self.records.iter().find(|r| r.generation == generation)
    }
}
