//! Exact verification engines.
//!
//! Every engine decides `y <= c` for a [`VerificationProblem`] and, on a
//! violation, returns an input `x` in the property with `y(x) > c + SLACK`.

pub mod bab;
pub mod external;
pub mod lp;
pub mod pattern;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::model::{Outcome, VerificationProblem, SLACK};

pub use bab::bab_verify;
pub use external::external_verify;
pub use pattern::pattern_enum_verify;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "command", rename_all = "lowercase")]
pub enum EngineKind {
    Pattern,
    Bab,
    /// Shell command template with `{network}` and `{property}` placeholders.
    External(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub kind: EngineKind,
    /// Pattern enumeration gives up above this many unstable ReLUs.
    pub max_unstable: usize,
    /// Branch and bound hands a box to pattern enumeration once every side is
    /// below this fraction of the original side.
    pub min_box_width: f64,
    /// Branch and bound also hands a box over once it has at most this many
    /// unstable ReLUs.
    pub pattern_fallback: usize,
    /// Per-call budget.
    pub time_budget: Option<Duration>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            kind: EngineKind::Bab,
            max_unstable: 20,
            min_box_width: 1e-4,
            pattern_fallback: 8,
            time_budget: None,
        }
    }
}

impl EngineConfig {
    pub fn with_kind(kind: EngineKind) -> EngineConfig {
        EngineConfig {
            kind,
            ..EngineConfig::default()
        }
    }
}

/// What an engine call produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineReport {
    pub outcome: Outcome,
    /// Boxes (branch and bound) or activation patterns (enumeration) visited.
    pub nodes: usize,
    pub lp_calls: usize,
}

impl EngineReport {
    pub(crate) fn new(outcome: Outcome) -> EngineReport {
        EngineReport {
            outcome,
            nodes: 0,
            lp_calls: 0,
        }
    }
}

/// Run the configured engine. `deadline` is an outer limit combined with the
/// engine's own budget.
pub fn run_engine(problem: &VerificationProblem, config: &EngineConfig, deadline: Option<Instant>) -> EngineReport {
    let own = config.time_budget.map(|d| Instant::now() + d);
    let deadline = match (own, deadline) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    match &config.kind {
        EngineKind::Pattern => pattern_enum_verify(problem, config.max_unstable, deadline),
        EngineKind::Bab => bab_verify(problem, config, deadline),
        EngineKind::External(cmd) => external_verify(problem, cmd, deadline),
    }
}

/// Whether `x` is a genuine violation of `problem`.
pub fn is_counterexample(problem: &VerificationProblem, x: &[f64]) -> bool {
    problem.contains(x, SLACK)
        && problem
            .network
            .evaluate_scalar(x)
            .is_ok_and(|y| y > problem.threshold + SLACK)
}

pub(crate) fn expired(deadline: Option<Instant>) -> bool {
    deadline.is_some_and(|d| Instant::now() >= d)
}

/// Clamp into the box.
pub(crate) fn clamp_to_box(x: &mut [f64], input_box: &[(f64, f64)]) {
    for (v, &(lo, hi)) in x.iter_mut().zip(input_box) {
        *v = v.clamp(lo, hi);
    }
}
