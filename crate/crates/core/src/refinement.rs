//! Counterexample-guided refinement.
//!
//! Refinement undoes abstraction steps. Only steps no other remaining step
//! depends on may be undone; [`DependencyGraph`] tracks which those are.
//! Dependencies are defined on the implicit order of the log, in which every
//! freeze comes first (top layer down) followed by the merges in their
//! original order. Replaying that order yields the same network as the log.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::abstraction::{propagate, recover_freeze, split_merge, AbstractionState, AbstractionStep, StepKind};
use crate::error::{Error, Result};
use crate::model::{NeuronId, StepId, SLACK};

/// Freezes first, by descending layer (stable within a layer), then the
/// merges in log order.
pub fn implicit_order(log: &[AbstractionStep]) -> Vec<AbstractionStep> {
    let mut freezes: Vec<&AbstractionStep> = log.iter().filter(|s| !s.kind.is_merge()).collect();
    freezes.sort_by_key(|s| std::cmp::Reverse(s.kind.layer()));
    freezes
        .into_iter()
        .chain(log.iter().filter(|s| s.kind.is_merge()))
        .cloned()
        .collect()
}

/// Which remaining steps depend on which. An edge `(a, b)` means `a` depends
/// on `b`, so `b` can only be undone once `a` is gone.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DependencyGraph {
    vertices: BTreeMap<StepId, StepKind>,
    edges: BTreeSet<(StepId, StepId)>,
}

impl DependencyGraph {
    /// Build the graph over a log given in implicit order.
    pub fn build(order: &[AbstractionStep]) -> DependencyGraph {
        let mut producer: HashMap<NeuronId, StepId> = HashMap::new();
        let mut edges = BTreeSet::new();
        for (i, step) in order.iter().enumerate() {
            let layer = step.kind.layer();
            for earlier in &order[..i] {
                let other = earlier.kind.layer();
                let depends = match (&earlier.kind, &step.kind) {
                    (StepKind::QFreeze { .. }, _) => other > layer,
                    (StepKind::Merge { .. }, StepKind::Merge { .. }) => other + 1 == layer || layer + 1 == other,
                    (StepKind::Merge { .. }, StepKind::QFreeze { .. }) => false,
                };
                if depends {
                    edges.insert((step.id, earlier.id));
                }
            }
            if let StepKind::Merge { left, right, result, .. } = step.kind {
                for operand in [left, right] {
                    if let Some(&p) = producer.get(&operand) {
                        edges.insert((step.id, p));
                    }
                }
                producer.insert(result, step.id);
            }
        }
        DependencyGraph {
            vertices: order.iter().map(|s| (s.id, s.kind.clone())).collect(),
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, id: StepId) -> bool {
        self.vertices.contains_key(&id)
    }

    pub fn edges(&self) -> impl Iterator<Item = (StepId, StepId)> + '_ {
        self.edges.iter().copied()
    }

    /// Steps nothing depends on, in increasing id order.
    pub fn available(&self) -> Vec<StepId> {
        let blocked: BTreeSet<StepId> = self.edges.iter().map(|&(_, to)| to).collect();
        self.vertices.keys().copied().filter(|id| !blocked.contains(id)).collect()
    }

    pub fn is_available(&self, id: StepId) -> bool {
        self.contains(id) && !self.edges.iter().any(|&(_, to)| to == id)
    }

    /// Remove an available vertex together with its outgoing edges.
    pub fn remove(&mut self, id: StepId) -> Result<()> {
        if !self.contains(id) {
            return Err(Error::UnknownStep(id));
        }
        if !self.is_available(id) {
            return Err(Error::StepNotAvailable(id));
        }
        self.vertices.remove(&id);
        self.edges.retain(|&(from, _)| from != id);
        Ok(())
    }
}

/// One undone abstraction step, as reported by `--trace-refinement`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRecord {
    pub step: StepId,
    pub kind: RefinementKind,
    pub profit: f64,
    /// Hidden size of the propagated abstraction after the step.
    pub remaining_size: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementKind {
    Split,
    Recover,
}

/// Undo one available step: split a merge or recover a freeze.
pub fn refine_step(state: &mut AbstractionState, dg: &mut DependencyGraph, id: StepId) -> Result<RefinementKind> {
    if !dg.contains(id) {
        return Err(Error::UnknownStep(id));
    }
    if !dg.is_available(id) {
        return Err(Error::StepNotAvailable(id));
    }
    let pos = state.log.iter().position(|s| s.id == id).ok_or(Error::UnknownStep(id))?;
    let step = &state.log[pos];
    let kind = match step.kind {
        StepKind::Merge { result, .. } => {
            split_merge(&mut state.current, step)?;
            state.leaves.remove(&result);
            state.estimates.remove(&result);
            RefinementKind::Split
        }
        StepKind::QFreeze { neuron, .. } => {
            recover_freeze(&mut state.current, step, &state.base)?;
            if let Some(b) = state.bounds.get(neuron) {
                state.estimates.insert(neuron, b);
            }
            RefinementKind::Recover
        }
    };
    state.log.remove(pos);
    dg.remove(id)?;
    Ok(kind)
}

/// Split a merge step.
pub fn split(state: &mut AbstractionState, dg: &mut DependencyGraph, id: StepId) -> Result<()> {
    match dg.vertices.get(&id) {
        Some(StepKind::Merge { .. }) => refine_step(state, dg, id).map(|_| ()),
        Some(_) => Err(Error::InvalidStep(format!("{id} is not a merge"))),
        None => Err(Error::UnknownStep(id)),
    }
}

/// Recover a frozen neuron.
pub fn recover(state: &mut AbstractionState, dg: &mut DependencyGraph, id: StepId) -> Result<()> {
    match dg.vertices.get(&id) {
        Some(StepKind::QFreeze { .. }) => refine_step(state, dg, id).map(|_| ()),
        Some(_) => Err(Error::InvalidStep(format!("{id} is not a freeze"))),
        None => Err(Error::UnknownStep(id)),
    }
}

/// Profit of undoing `step` for the input `ce`. `exact` holds the neuron
/// values of the preprocessed network at `ce` and `abstracted` those of the
/// current abstraction.
pub fn profit(
    state: &AbstractionState,
    step: &AbstractionStep,
    exact: &HashMap<NeuronId, f64>,
    abstracted: &HashMap<NeuronId, f64>,
) -> f64 {
    match step.kind {
        StepKind::Merge { result, .. } => {
            let atomic: f64 = state.leaves_of(result).iter().map(|id| exact[id]).sum();
            (atomic - abstracted.get(&result).copied().unwrap_or(0.0)).abs()
        }
        StepKind::QFreeze { neuron, constant, .. } => (exact[&neuron] - constant).abs(),
    }
}

/// Undo maximum-profit available steps until the propagated abstraction maps
/// `ce` to at most the threshold. `ce` must not violate the property on the
/// preprocessed network.
pub fn refine_until_excluded(
    state: &mut AbstractionState,
    dg: &mut DependencyGraph,
    ce: &[f64],
) -> Result<Vec<RefinementRecord>> {
    let original = state.base.evaluate_scalar(ce)?;
    if original > state.threshold + SLACK {
        return Err(Error::NotSpurious {
            original,
            abstracted: propagate(&state.current).evaluate_scalar(ce)?,
            threshold: state.threshold,
        });
    }
    let exact = state.base.neuron_values(ce)?;
    let mut records = Vec::new();
    loop {
        let net = propagate(&state.current);
        if net.evaluate_scalar(ce)? <= state.threshold + SLACK {
            return Ok(records);
        }
        let abstracted = state.current.neuron_values(ce)?;
        let mut best: Option<(f64, StepId)> = None;
        for id in dg.available() {
            let step = state.log.iter().find(|s| s.id == id).ok_or(Error::UnknownStep(id))?;
            let p = profit(state, step, &exact, &abstracted);
            if best.is_none_or(|(bp, _)| p > bp) {
                best = Some((p, id));
            }
        }
        let Some((p, id)) = best else {
            return Err(Error::NoCandidate);
        };
        let kind = refine_step(state, dg, id)?;
        let record = RefinementRecord {
            step: id,
            kind,
            profit: p,
            remaining_size: state.hidden_size(),
        };
        log::debug!("refined {:?}", record);
        records.push(record);
    }
}
