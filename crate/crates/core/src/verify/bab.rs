//! Branch and bound over the input box.
//!
//! Boxes are processed best-upper-bound first. A box is discarded when its
//! symbolic output bound is at most the threshold or a halfspace excludes it,
//! searched for a concrete violation otherwise, and finally either split
//! along its widest side (relative to the original box) or handed to pattern
//! enumeration once it is small or nearly linear.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::pattern::pattern_enum_verify;
use super::{expired, is_counterexample, EngineConfig, EngineReport};
use crate::bounds::symbolic_layers;
use crate::model::{Activation, Outcome, VerificationProblem};

struct Node {
    priority: f64,
    id: usize,
    input_box: Vec<(f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub fn bab_verify(problem: &VerificationProblem, config: &EngineConfig, deadline: Option<Instant>) -> EngineReport {
    let mut report = EngineReport::new(Outcome::Holds);
    let original: Vec<f64> = problem.input_box.iter().map(|(lo, hi)| hi - lo).collect();
    let mut queue = BinaryHeap::new();
    queue.push(Node {
        priority: f64::INFINITY,
        id: 0,
        input_box: problem.input_box.clone(),
    });
    let mut next_id = 1;
    let mut unresolved: Option<String> = None;

    while let Some(node) = queue.pop() {
        if expired(deadline) {
            report.outcome = Outcome::unknown("timeout");
            return report;
        }
        report.nodes += 1;
        let sub = problem.with_box(node.input_box);
        if excluded_by_halfspace(&sub) {
            continue;
        }
        let layers = symbolic_layers(&sub.network, &sub.input_box);
        let ub = layers.last().and_then(|l| l.post.first()).map_or(f64::NEG_INFINITY, |b| b.1);
        if ub <= sub.threshold {
            continue;
        }
        if let Some(x) = falsify(&sub) {
            report.outcome = Outcome::Violated { counterexample: x };
            return report;
        }
        let unstable = sub
            .network
            .layers
            .iter()
            .zip(&layers)
            .filter(|(l, _)| l.activation == Activation::Relu)
            .flat_map(|(_, b)| &b.pre)
            .filter(|&&(lo, hi)| lo < 0.0 && hi > 0.0)
            .count();
        let narrow = sub
            .input_box
            .iter()
            .zip(&original)
            .all(|(&(lo, hi), &w)| hi - lo <= config.min_box_width * w);
        if narrow || unstable <= config.pattern_fallback {
            let exact = pattern_enum_verify(&sub, config.max_unstable, deadline);
            report.lp_calls += exact.lp_calls;
            match exact.outcome {
                Outcome::Holds => continue,
                Outcome::Violated { .. } => {
                    report.outcome = exact.outcome;
                    return report;
                }
                Outcome::Unknown { reason } => {
                    if reason == "timeout" {
                        report.outcome = Outcome::unknown(reason);
                        return report;
                    }
                    if narrow {
                        unresolved.get_or_insert(reason);
                        continue;
                    }
                }
            }
        }
        let (dim, _) = sub
            .input_box
            .iter()
            .zip(&original)
            .enumerate()
            .map(|(d, (&(lo, hi), &w))| (d, if w > 0.0 { (hi - lo) / w } else { 0.0 }))
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
        let (lo, hi) = sub.input_box[dim];
        let mid = 0.5 * (lo + hi);
        for half in [(lo, mid), (mid, hi)] {
            let mut child = sub.input_box.clone();
            child[dim] = half;
            queue.push(Node {
                priority: ub,
                id: next_id,
                input_box: child,
            });
            next_id += 1;
        }
    }
    if let Some(reason) = unresolved {
        report.outcome = Outcome::unknown(reason);
    }
    report
}

/// A halfspace whose minimum over the box exceeds its bound.
fn excluded_by_halfspace(problem: &VerificationProblem) -> bool {
    problem.halfspaces.iter().any(|h| {
        let min: f64 = h
            .a
            .iter()
            .zip(&problem.input_box)
            .map(|(&a, &(lo, hi))| (a * lo).min(a * hi))
            .sum();
        min > h.b + crate::model::SLACK
    })
}

/// Concrete search for a violation: centre, corners (up to ten inputs), then
/// coordinate search from the best point found.
fn falsify(problem: &VerificationProblem) -> Option<Vec<f64>> {
    let b = &problem.input_box;
    let n = b.len();
    let eval = |x: &[f64]| -> f64 {
        if problem.contains(x, 0.0) {
            problem.network.evaluate_scalar(x).unwrap_or(f64::NEG_INFINITY)
        } else {
            f64::NEG_INFINITY
        }
    };
    let centre: Vec<f64> = b.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut best = (eval(&centre), centre);
    if n <= 10 {
        for mask in 0u32..(1 << n) {
            let x: Vec<f64> = (0..n)
                .map(|i| if mask >> i & 1 == 1 { b[i].1 } else { b[i].0 })
                .collect();
            let y = eval(&x);
            if y > best.0 {
                best = (y, x);
            }
        }
    }
    if is_counterexample(problem, &best.1) {
        return Some(best.1);
    }
    let mut step: Vec<f64> = b.iter().map(|(lo, hi)| 0.25 * (hi - lo)).collect();
    for _ in 0..12 {
        let mut improved = false;
        for d in 0..n {
            for sign in [-1.0, 1.0] {
                let mut x = best.1.clone();
                x[d] = (x[d] + sign * step[d]).clamp(b[d].0, b[d].1);
                let y = eval(&x);
                if y > best.0 {
                    best = (y, x);
                    improved = true;
                }
            }
        }
        if is_counterexample(problem, &best.1) {
            return Some(best.1);
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    None
}
