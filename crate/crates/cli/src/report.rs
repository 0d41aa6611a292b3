//! JSON reports for single queries and benchmark runs.

use nncegar::model::Timings;
use nncegar::{Outcome, Summary};
use serde::{Deserialize, Serialize};

/// One solved (or failed) single-output problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemReport {
    /// Adversarial class for robustness sub-problems.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<usize>,
    #[serde(flatten)]
    pub summary: Summary,
}

/// A query: either one property or one robustness question split into
/// several problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryReport {
    pub name: String,
    #[serde(flatten)]
    pub outcome: Outcome,
    /// Adversarial class of the reported counterexample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<usize>,
    /// Set when the query could not be run at all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub time: f64,
    pub problems: Vec<ProblemReport>,
}

impl QueryReport {
    /// Combine sub-problem results: any violation wins (lowest class first),
    /// all holding means the query holds, anything else is unknown.
    pub fn from_problems(name: String, problems: Vec<ProblemReport>, time: f64) -> QueryReport {
        let violated = problems
            .iter()
            .find(|p| matches!(p.summary.outcome, Outcome::Violated { .. }));
        let (outcome, adversary) = if let Some(p) = violated {
            (p.summary.outcome.clone(), p.adversary)
        } else if let Some(p) = problems.iter().find(|p| !p.summary.outcome.is_definite()) {
            (p.summary.outcome.clone(), None)
        } else {
            (Outcome::Holds, None)
        };
        QueryReport {
            name,
            outcome,
            adversary,
            error: None,
            time,
            problems,
        }
    }

    pub fn failed(name: String, error: String) -> QueryReport {
        QueryReport {
            name,
            outcome: Outcome::unknown(format!("error: {error}")),
            adversary: None,
            error: Some(error),
            time: 0.0,
            problems: vec![],
        }
    }

    /// Exit status: 0 holds, 1 violated, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            Outcome::Holds => 0,
            Outcome::Violated { .. } => 1,
            Outcome::Unknown { .. } => 2,
        }
    }

    /// Zero every wall-clock field so reports compare byte for byte.
    pub fn strip_times(&mut self) {
        self.time = 0.0;
        for p in &mut self.problems {
            p.summary.timings = Timings::default();
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub total: usize,
    /// Queries with a definite verdict.
    pub solved: usize,
    pub holds: usize,
    pub violated: usize,
    pub average_time: f64,
    /// Mean abstracted hidden size over all sub-problems that reached the
    /// abstraction phase.
    pub average_abstract_size: f64,
}

impl Aggregate {
    pub fn from_queries(queries: &[QueryReport]) -> Aggregate {
        let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
        let times: Vec<f64> = queries.iter().map(|q| q.time).collect();
        let sizes: Vec<f64> = queries
            .iter()
            .flat_map(|q| &q.problems)
            .map(|p| p.summary.hidden_sizes[2] as f64)
            .collect();
        Aggregate {
            total: queries.len(),
            solved: queries.iter().filter(|q| q.outcome.is_definite()).count(),
            holds: queries.iter().filter(|q| q.outcome == Outcome::Holds).count(),
            violated: queries
                .iter()
                .filter(|q| matches!(q.outcome, Outcome::Violated { .. }))
                .count(),
            average_time: mean(&times),
            average_abstract_size: mean(&sizes),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub queries: Vec<QueryReport>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn new(queries: Vec<QueryReport>) -> RunReport {
        let aggregate = Aggregate::from_queries(&queries);
        RunReport { queries, aggregate }
    }
}
