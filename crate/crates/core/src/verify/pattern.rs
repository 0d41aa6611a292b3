//! Activation-pattern enumeration.
//!
//! ReLUs whose pre-activation bounds straddle zero are branched on, one at a
//! time in network order. Each branch adds its phase as a linear constraint
//! on the inputs and is dropped as soon as the constraints become
//! infeasible. With every phase fixed the network is affine on the remaining
//! polytope, and one LP gives its maximum there.

use std::time::Instant;

use super::lp::{LinearProgram, LpResult};
use super::{clamp_to_box, expired, is_counterexample, EngineReport};
use crate::bounds::{symbolic_layers, LayerBounds};
use crate::model::{Activation, Outcome, VerificationProblem};

/// Leaves whose LP maximum is at most `c + LEAF_TOLERANCE` count as safe.
pub const LEAF_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Debug)]
struct Affine {
    coeffs: Vec<f64>,
    constant: f64,
}

impl Affine {
    fn zero(n: usize) -> Affine {
        Affine {
            coeffs: vec![0.0; n],
            constant: 0.0,
        }
    }

    fn combine(row: &[f64], bias: f64, inputs: &[Affine], n: usize) -> Affine {
        let mut out = Affine {
            coeffs: vec![0.0; n],
            constant: bias,
        };
        for (&w, a) in row.iter().zip(inputs) {
            if w == 0.0 {
                continue;
            }
            out.constant += w * a.constant;
            for (o, c) in out.coeffs.iter_mut().zip(&a.coeffs) {
                *o += w * c;
            }
        }
        out
    }
}

/// Count of hidden ReLUs whose pre-activation bounds over the box straddle zero.
pub fn unstable_count(problem: &VerificationProblem) -> usize {
    count_unstable(problem, &symbolic_layers(&problem.network, &problem.input_box))
}

fn count_unstable(problem: &VerificationProblem, layers: &[LayerBounds]) -> usize {
    problem
        .network
        .layers
        .iter()
        .zip(layers)
        .filter(|(l, _)| l.activation == Activation::Relu)
        .flat_map(|(_, b)| &b.pre)
        .filter(|&&(lo, hi)| lo < 0.0 && hi > 0.0)
        .count()
}

pub fn pattern_enum_verify(problem: &VerificationProblem, max_unstable: usize, deadline: Option<Instant>) -> EngineReport {
    let layers = symbolic_layers(&problem.network, &problem.input_box);
    let unstable = count_unstable(problem, &layers);
    if unstable > max_unstable {
        return EngineReport::new(Outcome::unknown(format!(
            "pattern budget: {unstable} unstable ReLUs exceed {max_unstable}"
        )));
    }
    let n = problem.network.input_dim;
    let mut lp = LinearProgram::new(problem.input_box.clone());
    for h in &problem.halfspaces {
        lp.push(h.a.clone(), h.b);
    }
    let inputs: Vec<Affine> = (0..n)
        .map(|i| {
            let mut a = Affine::zero(n);
            a.coeffs[i] = 1.0;
            a
        })
        .collect();
    let mut search = Search {
        problem,
        pre: layers.iter().map(|l| l.pre.clone()).collect(),
        lp,
        deadline,
        report: EngineReport::new(Outcome::Holds),
        imprecise: false,
    };
    search.report.lp_calls += 1;
    if !search.lp.feasible() {
        return search.report;
    }
    let outcome = match search.layer(0, inputs) {
        Some(o) => o,
        None if search.imprecise => Outcome::unknown("pattern enumeration: LP optimum did not reproduce"),
        None => Outcome::Holds,
    };
    search.report.outcome = outcome;
    search.report
}

struct Search<'a> {
    problem: &'a VerificationProblem,
    pre: Vec<Vec<(f64, f64)>>,
    lp: LinearProgram,
    deadline: Option<Instant>,
    report: EngineReport,
    imprecise: bool,
}

impl Search<'_> {
    /// Explore layer `li` given the affine forms of its inputs. Returns a
    /// definite non-Holds outcome to stop the search early.
    fn layer(&mut self, li: usize, inputs: Vec<Affine>) -> Option<Outcome> {
        let net = &self.problem.network;
        if li + 1 == net.layers.len() {
            return self.leaf(&inputs);
        }
        self.neuron(li, 0, &inputs, Vec::with_capacity(net.layers[li].len()))
    }

    fn neuron(&mut self, li: usize, j: usize, inputs: &[Affine], mut done: Vec<Affine>) -> Option<Outcome> {
        if expired(self.deadline) {
            return Some(Outcome::unknown("timeout"));
        }
        let layer = &self.problem.network.layers[li];
        if j == layer.len() {
            return self.layer(li + 1, done);
        }
        let n = self.problem.network.input_dim;
        let z = Affine::combine(&layer.weights[j], layer.biases[j], inputs, n);
        let (lo, hi) = self.pre[li][j];
        if layer.activation == Activation::Identity || lo >= 0.0 {
            done.push(z);
            return self.neuron(li, j + 1, inputs, done);
        }
        if hi <= 0.0 {
            done.push(Affine::zero(n));
            return self.neuron(li, j + 1, inputs, done);
        }
        // Active: z >= 0, i.e. -z.coeffs · x <= z.constant.
        let neg: Vec<f64> = z.coeffs.iter().map(|c| -c).collect();
        for active in [true, false] {
            if active {
                self.lp.push(neg.clone(), z.constant);
            } else {
                self.lp.push(z.coeffs.clone(), -z.constant);
            }
            self.report.lp_calls += 1;
            let result = if self.lp.feasible() {
                let mut next = done.clone();
                next.push(if active { z.clone() } else { Affine::zero(n) });
                self.neuron(li, j + 1, inputs, next)
            } else {
                None
            };
            self.lp.pop();
            if result.is_some() {
                return result;
            }
        }
        None
    }

    fn leaf(&mut self, inputs: &[Affine]) -> Option<Outcome> {
        self.report.nodes += 1;
        let out = &self.problem.network.layers.last().expect("network has an output layer");
        let n = self.problem.network.input_dim;
        let y = Affine::combine(&out.weights[0], out.biases[0], inputs, n);
        self.report.lp_calls += 1;
        match self.lp.maximize(&y.coeffs) {
            LpResult::Optimal { mut x, value } => {
                if value + y.constant <= self.problem.threshold + LEAF_TOLERANCE {
                    return None;
                }
                clamp_to_box(&mut x, &self.problem.input_box);
                if is_counterexample(self.problem, &x) {
                    return Some(Outcome::Violated { counterexample: x });
                }
                self.imprecise = true;
                None
            }
            LpResult::Infeasible => None,
            LpResult::Unbounded => Some(Outcome::unknown("pattern enumeration: unbounded LP")),
        }
    }
}
