//! Network-level abstraction and refinement primitives.
//!
//! Every primitive addresses neurons by id. Layer order is kept sorted by
//! [`NeuronMeta::slot`], so undoing a merge puts the operands back exactly
//! where they were.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, Layer, Network, NeuronId, NeuronKind, NeuronMeta, StepId};

/// Everything needed to restore one neuron removed or overwritten by a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronSnapshot {
    pub meta: NeuronMeta,
    /// Ids of the previous layer when the snapshot was taken (empty for the
    /// first hidden layer, whose predecessors are the inputs).
    pub predecessors: Vec<NeuronId>,
    pub incoming: Vec<f64>,
    pub bias: f64,
    /// Weight into each successor, keyed by successor id.
    pub outgoing: Vec<(NeuronId, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "primitive", rename_all = "lowercase")]
pub enum StepKind {
    Merge {
        layer: usize,
        left: NeuronId,
        right: NeuronId,
        result: NeuronId,
    },
    #[serde(rename = "qfreeze")]
    QFreeze {
        layer: usize,
        neuron: NeuronId,
        constant: f64,
    },
}

impl StepKind {
    pub fn layer(&self) -> usize {
        match self {
            StepKind::Merge { layer, .. } | StepKind::QFreeze { layer, .. } => *layer,
        }
    }

    pub fn is_merge(&self) -> bool {
        matches!(self, StepKind::Merge { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractionStep {
    pub id: StepId,
    pub kind: StepKind,
    /// Operand snapshots for a merge, the frozen neuron's prior state for a freeze.
    #[serde(skip)]
    pub undo: Vec<NeuronSnapshot>,
}

fn predecessor_ids(net: &Network, layer: usize) -> Vec<NeuronId> {
    if layer == 0 {
        Vec::new()
    } else {
        net.layers[layer - 1].neurons.iter().map(|n| n.id).collect()
    }
}

fn snapshot(net: &Network, layer: usize, pos: usize) -> NeuronSnapshot {
    let l = &net.layers[layer];
    let next = &net.layers[layer + 1];
    NeuronSnapshot {
        meta: l.neurons[pos].clone(),
        predecessors: predecessor_ids(net, layer),
        incoming: l.weights[pos].clone(),
        bias: l.biases[pos],
        outgoing: next
            .neurons
            .iter()
            .zip(&next.weights)
            .map(|(m, row)| (m.id, row[pos]))
            .collect(),
    }
}

fn hidden_position(net: &Network, id: NeuronId) -> Result<(usize, usize)> {
    let (layer, pos) = net.locate(id).ok_or(Error::UnknownNeuron(id))?;
    if net.is_output_layer(layer) {
        return Err(Error::NotHidden(id));
    }
    Ok((layer, pos))
}

fn remove_neuron(net: &mut Network, layer: usize, pos: usize) {
    let l = &mut net.layers[layer];
    l.weights.remove(pos);
    l.biases.remove(pos);
    l.neurons.remove(pos);
    for row in &mut net.layers[layer + 1].weights {
        row.remove(pos);
    }
}

/// Insert a neuron at its slot position; `column` gives its weight into each
/// successor row, in current successor order.
fn insert_neuron(net: &mut Network, layer: usize, meta: NeuronMeta, incoming: Vec<f64>, bias: f64, column: Vec<f64>) {
    let l = &mut net.layers[layer];
    let pos = l.neurons.partition_point(|n| n.slot < meta.slot);
    l.weights.insert(pos, incoming);
    l.biases.insert(pos, bias);
    l.neurons.insert(pos, meta);
    for (row, w) in net.layers[layer + 1].weights.iter_mut().zip(column) {
        row.insert(pos, w);
    }
}

/// Check that `left` and `right` may be merged; returns their layer and positions.
pub fn check_merge(net: &Network, left: NeuronId, right: NeuronId) -> Result<(usize, usize, usize)> {
    if left == right {
        return Err(Error::InvalidStep(format!("cannot merge {left} with itself")));
    }
    let (la, pa) = hidden_position(net, left)?;
    let (lb, pb) = hidden_position(net, right)?;
    if la != lb {
        return Err(Error::CrossLayer(left, right));
    }
    let ma = &net.layers[la].neurons[pa];
    let mb = &net.layers[lb].neurons[pb];
    for m in [ma, mb] {
        if matches!(m.kind, NeuronKind::Constant(_)) {
            return Err(Error::ConstantOperand(m.id));
        }
    }
    if ma.label != mb.label || ma.label == Label::None {
        return Err(Error::LabelMismatch(left, right));
    }
    Ok((la, pa, pb))
}

/// Incoming weights and bias the merged neuron would get: element-wise max
/// for Inc operands, min for Dec operands.
///
/// Hidden predecessors are ReLU outputs and never negative, so comparing
/// weights is enough there. Inputs can be negative, so first-layer rows are
/// compared in coordinates shifted to `origin` (the lower corner of the input
/// box): the weights are combined as usual and the bias is chosen so that the
/// merged neuron dominates both operands on every `x >= origin`. With a zero
/// origin this reduces to the plain max/min of the biases.
pub fn merged_incoming(net: &Network, layer: usize, pa: usize, pb: usize, origin: &[f64]) -> (Vec<f64>, f64) {
    let l = &net.layers[layer];
    let pick: fn(f64, f64) -> f64 = match l.neurons[pa].label {
        Label::Dec => f64::min,
        _ => f64::max,
    };
    let row: Vec<f64> = l.weights[pa]
        .iter()
        .zip(&l.weights[pb])
        .map(|(&a, &b)| pick(a, b))
        .collect();
    if layer > 0 || origin.iter().all(|&o| o == 0.0) {
        return (row, pick(l.biases[pa], l.biases[pb]));
    }
    let at = |w: &[f64]| w.iter().zip(origin).map(|(w, o)| w * o).sum::<f64>();
    let shifted = pick(
        l.biases[pa] + at(&l.weights[pa]),
        l.biases[pb] + at(&l.weights[pb]),
    );
    let bias = shifted - at(&row);
    (row, bias)
}

/// Merge two same-layer, same-label neurons into `result`. `origin` is the
/// lower corner of the input box (see [`merged_incoming`]).
pub fn merge_neurons(
    net: &mut Network,
    step: StepId,
    left: NeuronId,
    right: NeuronId,
    result: NeuronId,
    origin: &[f64],
) -> Result<AbstractionStep> {
    let (layer, pa, pb) = check_merge(net, left, right)?;
    if net.locate(result).is_some() {
        return Err(Error::InvalidStep(format!("result id {result} already in use")));
    }
    let (incoming, bias) = merged_incoming(net, layer, pa, pb, origin);
    let column: Vec<f64> = net.layers[layer + 1]
        .weights
        .iter()
        .map(|row| row[pa] + row[pb])
        .collect();
    let undo = vec![snapshot(net, layer, pa), snapshot(net, layer, pb)];
    let meta = NeuronMeta {
        id: result,
        layer,
        slot: undo[0].meta.slot.min(undo[1].meta.slot),
        label: undo[0].meta.label,
        kind: NeuronKind::Abstract(step),
        bounds: None,
    };
    let (hi, lo) = if pa > pb { (pa, pb) } else { (pb, pa) };
    remove_neuron(net, layer, hi);
    remove_neuron(net, layer, lo);
    insert_neuron(net, layer, meta, incoming, bias, column);
    Ok(AbstractionStep {
        id: step,
        kind: StepKind::Merge {
            layer,
            left,
            right,
            result,
        },
        undo,
    })
}

/// Freeze an atomic hidden neuron to `constant`: incoming weights zeroed, bias replaced.
pub fn freeze_neuron(net: &mut Network, step: StepId, neuron: NeuronId, constant: f64) -> Result<AbstractionStep> {
    let (layer, pos) = hidden_position(net, neuron)?;
    match net.layers[layer].neurons[pos].kind {
        NeuronKind::Constant(_) => return Err(Error::ConstantOperand(neuron)),
        NeuronKind::Abstract(_) => return Err(Error::NonAtomic(neuron)),
        NeuronKind::Atomic => {}
    }
    let undo = vec![snapshot(net, layer, pos)];
    let l = &mut net.layers[layer];
    l.weights[pos].iter_mut().for_each(|w| *w = 0.0);
    l.biases[pos] = constant;
    l.neurons[pos].kind = NeuronKind::Constant(step);
    Ok(AbstractionStep {
        id: step,
        kind: StepKind::QFreeze {
            layer,
            neuron,
            constant,
        },
        undo,
    })
}

/// Undo a merge: remove the merged neuron and restore both operands.
/// Weights into successors that are currently frozen are restored as zero.
pub fn split_merge(net: &mut Network, step: &AbstractionStep) -> Result<()> {
    let StepKind::Merge { layer, result, .. } = step.kind else {
        return Err(Error::InvalidStep(format!("{} is not a merge", step.id)));
    };
    let (l, pos) = net.locate(result).ok_or(Error::UnknownNeuron(result))?;
    if l != layer || net.layers[l].neurons[pos].kind != NeuronKind::Abstract(step.id) {
        return Err(Error::InvalidStep(format!("{result} was not produced by {}", step.id)));
    }
    let preds = predecessor_ids(net, layer);
    let successors: Vec<(NeuronId, bool)> = net.layers[layer + 1]
        .neurons
        .iter()
        .map(|m| (m.id, matches!(m.kind, NeuronKind::Constant(_))))
        .collect();
    let mut columns = Vec::with_capacity(step.undo.len());
    for snap in &step.undo {
        if snap.predecessors != preds {
            return Err(Error::InvalidStep(format!(
                "layer {} changed since {}; refine dependents first",
                layer.wrapping_sub(1),
                step.id
            )));
        }
        let column = successors
            .iter()
            .map(|&(sid, frozen)| {
                if frozen {
                    return Ok(0.0);
                }
                snap.outgoing
                    .iter()
                    .find(|(id, _)| *id == sid)
                    .map(|&(_, w)| w)
                    .ok_or_else(|| {
                        Error::InvalidStep(format!(
                            "successor {sid} did not exist when {} was applied",
                            step.id
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(column);
    }
    remove_neuron(net, layer, pos);
    for (snap, column) in step.undo.iter().zip(columns) {
        insert_neuron(net, layer, snap.meta.clone(), snap.incoming.clone(), snap.bias, column);
    }
    Ok(())
}

/// Undo a freeze. The incoming row comes from the snapshot when the previous
/// layer still looks as it did then, otherwise from `base` (the network the
/// abstraction started from), whose previous layer must then match.
pub fn recover_freeze(net: &mut Network, step: &AbstractionStep, base: &Network) -> Result<()> {
    let StepKind::QFreeze { layer, neuron, .. } = step.kind else {
        return Err(Error::InvalidStep(format!("{} is not a freeze", step.id)));
    };
    let snap = step
        .undo
        .first()
        .ok_or_else(|| Error::InvalidStep(format!("{} has no undo record", step.id)))?;
    let (l, pos) = net.locate(neuron).ok_or(Error::UnknownNeuron(neuron))?;
    if l != layer || net.layers[l].neurons[pos].kind != NeuronKind::Constant(step.id) {
        return Err(Error::InvalidStep(format!("{neuron} was not frozen by {}", step.id)));
    }
    let preds = predecessor_ids(net, layer);
    let row = if snap.predecessors == preds {
        snap.incoming.clone()
    } else if predecessor_ids(base, layer) == preds {
        let (bl, bp) = base.locate(neuron).ok_or(Error::UnknownNeuron(neuron))?;
        base.layers[bl].weights[bp].clone()
    } else {
        return Err(Error::InvalidStep(format!(
            "layer {} changed since {}; refine dependents first",
            layer.wrapping_sub(1),
            step.id
        )));
    };
    let target: &mut Layer = &mut net.layers[l];
    target.weights[pos] = row;
    target.biases[pos] = snap.bias;
    target.neurons[pos].kind = snap.meta.kind;
    Ok(())
}

/// Remove every constant neuron, folding its value into the successors'
/// biases. Computes the same function as its argument.
pub fn propagate(network: &Network) -> Network {
    let mut net = network.clone();
    for li in 0..net.layers.len().saturating_sub(1) {
        let constants: Vec<usize> = net.layers[li]
            .neurons
            .iter()
            .enumerate()
            .filter(|(_, m)| matches!(m.kind, NeuronKind::Constant(_)))
            .map(|(p, _)| p)
            .collect();
        if constants.is_empty() {
            continue;
        }
        let act = net.layers[li].activation;
        let values: Vec<f64> = constants.iter().map(|&p| act.apply(net.layers[li].biases[p])).collect();
        let (lower, upper) = net.layers.split_at_mut(li + 1);
        let next = &mut upper[0];
        for ((row, b), meta) in next.weights.iter().zip(next.biases.iter_mut()).zip(&next.neurons) {
            if matches!(meta.kind, NeuronKind::Constant(_)) {
                continue;
            }
            for (&p, &v) in constants.iter().zip(&values) {
                *b += row[p] * v;
            }
        }
        let cur = &mut lower[li];
        for &p in constants.iter().rev() {
            cur.weights.remove(p);
            cur.biases.remove(p);
            cur.neurons.remove(p);
            for row in &mut next.weights {
                row.remove(p);
            }
        }
    }
    net
}
