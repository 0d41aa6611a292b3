//! The abstraction-refinement loop.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::abstraction::{draw_samples, propagate, run_abstraction, AbstractionConfig, AbstractionState};
use crate::bounds::{BoundsMethod, BoundsTable};
use crate::error::{Error, Result};
use crate::model::{Outcome, RefinementRound, Stats, Timings, Verdict, VerificationProblem, SLACK};
use crate::preprocess::preprocess_pruned;
use crate::refinement::{implicit_order, refine_until_excluded, DependencyGraph, RefinementRecord};
use crate::verify::{is_counterexample, run_engine, EngineConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CegarConfig {
    pub engine: EngineConfig,
    pub sample_count: usize,
    pub seed: u64,
    pub abstraction_enabled: bool,
    pub max_cegar_iterations: usize,
    pub bounds: BoundsMethod,
    /// Budget for the whole solve.
    pub time_budget: Option<Duration>,
}

impl Default for CegarConfig {
    fn default() -> Self {
        CegarConfig {
            engine: EngineConfig::default(),
            sample_count: 100,
            seed: 0,
            abstraction_enabled: true,
            max_cegar_iterations: 10_000,
            bounds: BoundsMethod::Symbolic,
            time_budget: None,
        }
    }
}

/// The compact per-problem result: verdict, iterations, sizes and timings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub iterations: usize,
    pub hidden_sizes: [usize; 4],
    pub timings: Timings,
}

impl From<&Verdict> for Summary {
    fn from(v: &Verdict) -> Summary {
        Summary {
            outcome: v.outcome.clone(),
            iterations: v.stats.iterations,
            hidden_sizes: v.stats.hidden_sizes,
            timings: v.stats.timings.clone(),
        }
    }
}

pub fn solve(problem: &VerificationProblem, config: &CegarConfig) -> Result<Verdict> {
    solve_traced(problem, config, &mut |_| {})
}

/// [`solve`], reporting every refinement step to `trace`.
pub fn solve_traced(
    problem: &VerificationProblem,
    config: &CegarConfig,
    trace: &mut dyn FnMut(&RefinementRecord),
) -> Result<Verdict> {
    problem.validate()?;
    if config.max_cegar_iterations == 0 {
        return Err(Error::InvalidProblem("max_cegar_iterations must be at least 1".into()));
    }
    let start = Instant::now();
    let deadline = config.time_budget.map(|d| start + d);
    let mut stats = Stats::default();
    stats.hidden_sizes[0] = problem.network.hidden_count();

    let t = Instant::now();
    let pre = problem.with_network(preprocess_pruned(&problem.network)?);
    stats.timings.preprocess = t.elapsed().as_secs_f64();
    stats.hidden_sizes[1] = pre.network.hidden_count();
    stats.hidden_sizes[2] = stats.hidden_sizes[1];
    stats.hidden_sizes[3] = stats.hidden_sizes[1];

    let t = Instant::now();
    let bounds = BoundsTable::compute(&pre.network, &pre.input_box, config.bounds);
    stats.timings.bounds = t.elapsed().as_secs_f64();

    let finish = |outcome: Outcome, mut stats: Stats| {
        stats.total_time = start.elapsed().as_secs_f64();
        stats.timings.total = stats.total_time;
        stats.engine_time = stats.timings.verify.iter().sum();
        Ok(Verdict { outcome, stats })
    };

    if bounds.output_upper(&pre.network).is_some_and(|ub| ub <= pre.threshold) {
        return finish(Outcome::Holds, stats);
    }
    for x in draw_samples(&pre, config.sample_count, config.seed) {
        if is_counterexample(&pre, &x) {
            return finish(confirm(problem, x), stats);
        }
    }

    let t = Instant::now();
    let mut state = if config.abstraction_enabled {
        let ac = AbstractionConfig {
            sample_count: config.sample_count,
            seed: config.seed,
        };
        run_abstraction(&pre, bounds, &ac)
    } else {
        AbstractionState::new(&pre, bounds, vec![])
    };
    stats.timings.abstraction = t.elapsed().as_secs_f64();
    stats.hidden_sizes[2] = state.hidden_size();
    log::info!(
        "abstraction: {} steps, hidden size {} -> {}",
        state.log.len(),
        stats.hidden_sizes[1],
        stats.hidden_sizes[2]
    );

    for _ in 0..config.max_cegar_iterations {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            return finish(Outcome::unknown("timeout"), stats);
        }
        let abstraction = propagate(&state.current);
        stats.hidden_sizes[3] = abstraction.hidden_count();
        stats.abstract_size_history.push(abstraction.hidden_count());
        stats.iterations += 1;

        let t = Instant::now();
        let report = run_engine(&pre.with_network(abstraction.clone()), &config.engine, deadline);
        stats.timings.verify.push(t.elapsed().as_secs_f64());
        let ce = match report.outcome {
            Outcome::Violated { counterexample } => counterexample,
            other => return finish(other, stats),
        };

        let original_output = pre.network.evaluate_scalar(&ce)?;
        if original_output > pre.threshold + SLACK {
            return finish(confirm(problem, ce), stats);
        }
        if state.log.is_empty() {
            return finish(
                Outcome::unknown("engine reported a counterexample the network does not violate"),
                stats,
            );
        }

        let t = Instant::now();
        let before = abstraction.evaluate_scalar(&ce)?;
        let mut dg = DependencyGraph::build(&implicit_order(&state.log));
        let records = refine_until_excluded(&mut state, &mut dg, &ce)?;
        records.iter().for_each(&mut *trace);
        stats.timings.refine.push(t.elapsed().as_secs_f64());
        let after = propagate(&state.current).evaluate_scalar(&ce)?;
        stats.rounds.push(RefinementRound {
            counterexample: ce,
            abstract_output_before: before,
            abstract_output_after: after,
            original_output,
            steps: records.len(),
        });
    }
    finish(Outcome::unknown("cegar budget"), stats)
}

/// Re-check a counterexample on the network as given.
fn confirm(problem: &VerificationProblem, x: Vec<f64>) -> Outcome {
    if is_counterexample(problem, &x) {
        Outcome::Violated { counterexample: x }
    } else {
        Outcome::unknown("counterexample does not reproduce on the original network")
    }
}
