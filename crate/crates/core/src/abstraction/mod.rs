//! Value-guided abstraction of a preprocessed network.
//!
//! An [`AbstractionState`] owns the working network together with the log of
//! applied steps. Each round picks the neuron with the smallest estimated
//! value, scores every step that would touch it and applies the cheapest.
//! Abstraction stops at the first step that makes the network exceed the
//! threshold on one of the sampled inputs; that step is undone.

mod primitives;

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use primitives::{
    check_merge, freeze_neuron, merge_neurons, merged_incoming, propagate, recover_freeze, split_merge,
    AbstractionStep, NeuronSnapshot, StepKind,
};

use crate::bounds::{midpoint, BoundsTable};
use crate::error::{Error, Result};
use crate::generators::sample_box;
use crate::model::{Label, Network, NeuronId, NeuronKind, StepId, VerificationProblem, SLACK};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractionConfig {
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for AbstractionConfig {
    fn default() -> Self {
        AbstractionConfig {
            sample_count: 100,
            seed: 0,
        }
    }
}

/// A scored step that has not been applied yet.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub action: Action,
    pub loss: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Freeze(NeuronId),
    Merge(NeuronId, NeuronId),
}

impl Action {
    fn rank(&self) -> (u8, u32) {
        match *self {
            Action::Freeze(_) => (0, 0),
            Action::Merge(_, partner) => (1, partner.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AbstractionState {
    /// The preprocessed network the abstraction started from.
    pub base: Network,
    pub current: Network,
    pub log: Vec<AbstractionStep>,
    /// Bounds of `base` over the input box; the source of every freezing constant.
    pub bounds: BoundsTable,
    /// Estimated post-activation range per live neuron.
    pub estimates: HashMap<NeuronId, (f64, f64)>,
    /// Atomic neurons folded into each merged neuron.
    pub leaves: HashMap<NeuronId, Vec<NeuronId>>,
    pub samples: Vec<Vec<f64>>,
    pub input_box: Vec<(f64, f64)>,
    pub threshold: f64,
    next_step: u32,
    next_neuron: u32,
}

impl AbstractionState {
    /// A state with an empty log. `bounds` must be computed on `problem.network`.
    pub fn new(problem: &VerificationProblem, bounds: BoundsTable, samples: Vec<Vec<f64>>) -> AbstractionState {
        let base = problem.network.clone();
        let estimates = base.neurons().filter_map(|m| Some((m.id, bounds.get(m.id)?))).collect();
        let next_neuron = base.max_neuron_id().map_or(0, |id| id.0 + 1);
        AbstractionState {
            current: base.clone(),
            base,
            log: Vec::new(),
            bounds,
            estimates,
            leaves: HashMap::new(),
            samples,
            input_box: problem.input_box.clone(),
            threshold: problem.threshold,
            next_step: 0,
            next_neuron,
        }
    }

    /// Lower corner of the input box.
    pub fn origin(&self) -> Vec<f64> {
        self.input_box.iter().map(|&(lo, _)| lo).collect()
    }

    /// Estimated value V of a neuron: the centre of its estimated range.
    pub fn value(&self, id: NeuronId) -> Option<f64> {
        self.estimates.get(&id).copied().map(midpoint)
    }

    /// Constant a freeze of `id` would use: the upper bound for Inc neurons,
    /// the lower bound for Dec neurons.
    pub fn freeze_constant(&self, id: NeuronId) -> Result<f64> {
        let meta = self.current.meta(id).ok_or(Error::UnknownNeuron(id))?;
        match meta.kind {
            NeuronKind::Atomic => {}
            NeuronKind::Abstract(_) => return Err(Error::NonAtomic(id)),
            NeuronKind::Constant(_) => return Err(Error::ConstantOperand(id)),
        }
        let (lb, ub) = self.bounds.get(id).ok_or(Error::MissingBounds(id))?;
        Ok(if meta.label == Label::Dec { lb } else { ub })
    }

    pub fn loss_freeze(&self, id: NeuronId) -> Result<f64> {
        let v = self.value(id).ok_or(Error::MissingBounds(id))?;
        Ok((self.freeze_constant(id)? - v).abs())
    }

    pub fn loss_merge(&self, left: NeuronId, right: NeuronId) -> Result<f64> {
        let (layer, pa, pb) = check_merge(&self.current, left, right)?;
        let (merged, _) = merged_incoming(&self.current, layer, pa, pb, &self.origin());
        let weights = &self.current.layers[layer].weights;
        let vl = self.value(left).ok_or(Error::MissingBounds(left))?;
        let vr = self.value(right).ok_or(Error::MissingBounds(right))?;
        Ok(change_ratio(&weights[pa], &merged) * vl + change_ratio(&weights[pb], &merged) * vr)
    }

    /// Hidden neurons that are not frozen.
    fn eligible(&self) -> Vec<(NeuronId, usize)> {
        self.current
            .hidden_layers()
            .iter()
            .enumerate()
            .flat_map(|(li, l)| {
                l.neurons
                    .iter()
                    .filter(|m| !matches!(m.kind, NeuronKind::Constant(_)))
                    .map(move |m| (m.id, li))
            })
            .collect()
    }

    /// Every step touching `target`, scored.
    pub fn candidates_for(&self, target: NeuronId) -> Result<Vec<Candidate>> {
        let meta = self.current.meta(target).ok_or(Error::UnknownNeuron(target))?;
        let mut out = Vec::new();
        if meta.kind == NeuronKind::Atomic && self.bounds.get(target).is_some() {
            out.push(Candidate {
                action: Action::Freeze(target),
                loss: self.loss_freeze(target)?,
            });
        }
        for partner in &self.current.layers[meta.layer].neurons {
            if partner.id == target || partner.label != meta.label || matches!(partner.kind, NeuronKind::Constant(_)) {
                continue;
            }
            out.push(Candidate {
                action: Action::Merge(target, partner.id),
                loss: self.loss_merge(target, partner.id)?,
            });
        }
        Ok(out)
    }

    /// The next step of the value-guided strategy. The target is the eligible
    /// neuron with the smallest estimated value (ties to the smaller id); if it
    /// admits no step, the next-smallest is tried.
    pub fn select_step(&self) -> Result<Candidate> {
        let mut targets: Vec<(f64, NeuronId)> = self
            .eligible()
            .into_iter()
            .filter_map(|(id, _)| Some((self.value(id)?, id)))
            .collect();
        targets.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, target) in targets {
            let best = self.candidates_for(target)?.into_iter().min_by(|a, b| {
                a.loss
                    .total_cmp(&b.loss)
                    .then_with(|| a.action.rank().cmp(&b.action.rank()))
            });
            if let Some(best) = best {
                return Ok(best);
            }
        }
        Err(Error::NoCandidate)
    }

    pub fn apply(&mut self, action: Action) -> Result<&AbstractionStep> {
        let id = StepId(self.next_step);
        let step = match action {
            Action::Freeze(n) => {
                let constant = self.freeze_constant(n)?;
                let step = freeze_neuron(&mut self.current, id, n, constant)?;
                self.estimates.insert(n, (constant, constant));
                step
            }
            Action::Merge(a, b) => {
                let result = NeuronId(self.next_neuron);
                let origin = self.origin();
                let step = merge_neurons(&mut self.current, id, a, b, result, &origin)?;
                self.next_neuron += 1;
                let range = self.merged_range(result);
                self.estimates.insert(result, range);
                let mut leaves = self.leaves_of(a);
                leaves.extend(self.leaves_of(b));
                leaves.sort();
                self.leaves.insert(result, leaves);
                step
            }
        };
        self.next_step += 1;
        self.log.push(step);
        Ok(self.log.last().expect("just pushed"))
    }

    pub fn merge(&mut self, left: NeuronId, right: NeuronId) -> Result<NeuronId> {
        match self.apply(Action::Merge(left, right))?.kind {
            StepKind::Merge { result, .. } => Ok(result),
            StepKind::QFreeze { .. } => unreachable!("merge produced a freeze step"),
        }
    }

    pub fn qfreeze(&mut self, neuron: NeuronId) -> Result<()> {
        self.apply(Action::Freeze(neuron)).map(|_| ())
    }

    /// Undo the most recent step.
    pub fn undo_last(&mut self) -> Result<Option<AbstractionStep>> {
        let Some(step) = self.log.pop() else {
            return Ok(None);
        };
        let undone = match step.kind {
            StepKind::Merge { result, .. } => split_merge(&mut self.current, &step).map(|_| {
                self.leaves.remove(&result);
                self.estimates.remove(&result);
            }),
            StepKind::QFreeze { neuron, .. } => recover_freeze(&mut self.current, &step, &self.base).map(|_| {
                if let Some(b) = self.bounds.get(neuron) {
                    self.estimates.insert(neuron, b);
                }
            }),
        };
        if let Err(e) = undone {
            self.log.push(step);
            return Err(e);
        }
        Ok(Some(step))
    }

    /// Atomic neurons represented by `id` (itself when atomic).
    pub fn leaves_of(&self, id: NeuronId) -> Vec<NeuronId> {
        self.leaves.get(&id).cloned().unwrap_or_else(|| vec![id])
    }

    /// One step of interval arithmetic from the predecessors' estimates.
    fn merged_range(&self, id: NeuronId) -> (f64, f64) {
        let (layer, pos) = self.current.locate(id).expect("merged neuron is present");
        let l = &self.current.layers[layer];
        let inputs: Vec<(f64, f64)> = if layer == 0 {
            self.input_box.clone()
        } else {
            self.current.layers[layer - 1]
                .neurons
                .iter()
                .map(|m| self.estimates.get(&m.id).copied().unwrap_or((0.0, 0.0)))
                .collect()
        };
        let (mut lo, mut hi) = (l.biases[pos], l.biases[pos]);
        for (&w, &(a, b)) in l.weights[pos].iter().zip(&inputs) {
            lo += (w * a).min(w * b);
            hi += (w * a).max(w * b);
        }
        (l.activation.apply(lo), l.activation.apply(hi))
    }

    pub fn hidden_size(&self) -> usize {
        propagate(&self.current).hidden_count()
    }

    /// Whether the propagated abstraction stays at or below the threshold on every sample.
    pub fn passes_samples(&self) -> bool {
        let net = propagate(&self.current);
        self.samples
            .iter()
            .all(|x| net.evaluate_scalar(x).is_ok_and(|y| y <= self.threshold + SLACK))
    }
}

/// Relative change of a weight row: sum |merged - w| / sum |w|, zero for an all-zero row.
pub fn change_ratio(weights: &[f64], merged: &[f64]) -> f64 {
    let denom: f64 = weights.iter().map(|w| w.abs()).sum();
    if denom == 0.0 {
        return 0.0;
    }
    weights.iter().zip(merged).map(|(w, m)| (m - w).abs()).sum::<f64>() / denom
}

/// Up to `count` uniform samples from the box that satisfy the halfspaces.
/// Rejection sampling gives up after `50 * count` draws.
pub fn draw_samples(problem: &VerificationProblem, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut budget = 50 * count.max(1);
    while out.len() < count && budget > 0 {
        let batch = sample_box(&mut rng, &problem.input_box, count - out.len());
        budget = budget.saturating_sub(batch.len());
        out.extend(batch.into_iter().filter(|x| problem.contains(x, 0.0)));
    }
    out
}

/// Run the value-guided strategy on a preprocessed problem.
pub fn run_abstraction(problem: &VerificationProblem, bounds: BoundsTable, config: &AbstractionConfig) -> AbstractionState {
    let samples = draw_samples(problem, config.sample_count, config.seed);
    let mut state = AbstractionState::new(problem, bounds, samples);
    if !state.passes_samples() {
        return state;
    }
    while let Ok(candidate) = state.select_step() {
        if let Err(e) = state.apply(candidate.action) {
            log::warn!("abstraction step {:?} failed: {e}", candidate.action);
            break;
        }
        if !state.passes_samples() {
            state.undo_last().expect("undoing the latest step");
            break;
        }
    }
    state
}

/// Re-apply the kinds of `steps`, in order, to a copy of `base`.
pub fn replay<'a>(
    base: &Network,
    origin: &[f64],
    steps: impl IntoIterator<Item = &'a AbstractionStep>,
) -> Result<Network> {
    let mut net = base.clone();
    for step in steps {
        match step.kind {
            StepKind::Merge { left, right, result, .. } => {
                merge_neurons(&mut net, step.id, left, right, result, origin)?;
            }
            StepKind::QFreeze { neuron, constant, .. } => {
                freeze_neuron(&mut net, step.id, neuron, constant)?;
            }
        }
    }
    Ok(net)
}
