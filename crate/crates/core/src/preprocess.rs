//! Inc/Dec classification by neuron splitting.
//!
//! Working backwards from the output (treated as Inc), every hidden neuron is
//! replaced by two copies with identical incoming weights and bias. The Inc
//! copy keeps the outgoing edges that push the output up when it grows
//! (positive into Inc successors, negative into Dec successors); the Dec copy
//! keeps the rest. The result computes the same function with at most twice
//! as many hidden neurons.

use crate::error::{Error, Result};
use crate::model::{Label, Layer, Network, NeuronId, NeuronKind, NeuronMeta};

/// Split every hidden neuron into an Inc and a Dec copy. No pruning.
pub fn preprocess(network: &Network) -> Result<Network> {
    classify(network, false)
}

/// [`preprocess`] with dead copies (all-zero outgoing weights) dropped as soon
/// as their layer is split, so they never influence the split of the layer
/// below. Computes the same function as [`preprocess`].
pub fn preprocess_pruned(network: &Network) -> Result<Network> {
    classify(network, true)
}

struct Params {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    labels: Vec<Label>,
}

fn classify(network: &Network, prune: bool) -> Result<Network> {
    network.validate()?;
    if network.output_dim() != 1 {
        return Err(Error::MultiOutput(network.output_dim()));
    }
    let mut layers: Vec<Params> = network
        .layers
        .iter()
        .map(|l| Params {
            weights: l.weights.clone(),
            biases: l.biases.clone(),
            labels: vec![Label::None; l.len()],
        })
        .collect();

    for i in (0..layers.len() - 1).rev() {
        let (lower, upper) = layers.split_at_mut(i + 1);
        split_layer(&mut lower[i], &mut upper[0], prune);
    }
    Ok(assemble(network, layers))
}

/// Split layer `cur` given that every neuron of `next` is already classified.
fn split_layer(cur: &mut Params, next: &mut Params, prune: bool) {
    let n = cur.biases.len();
    let signs: Vec<f64> = next.labels.iter().map(|l| l.sign()).collect();

    let mut weights = Vec::with_capacity(2 * n);
    let mut biases = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for j in 0..n {
        for label in [Label::Inc, Label::Dec] {
            weights.push(cur.weights[j].clone());
            biases.push(cur.biases[j]);
            labels.push(label);
        }
    }
    for (row, &s) in next.weights.iter_mut().zip(&signs) {
        let mut split = Vec::with_capacity(2 * n);
        for &w in row.iter() {
            let plus = if w * s > 0.0 { w } else { 0.0 };
            let minus = if w * s < 0.0 { w } else { 0.0 };
            split.push(plus);
            split.push(minus);
        }
        *row = split;
    }

    let dead: Vec<bool> = (0..2 * n)
        .map(|c| next.weights.iter().all(|row| row[c] == 0.0))
        .collect();
    for (label, &d) in labels.iter_mut().zip(&dead) {
        if d {
            *label = Label::Inc;
        }
    }

    cur.weights = weights;
    cur.biases = biases;
    cur.labels = labels;
    if prune {
        drop_columns(cur, next, &dead);
    }
}

fn drop_columns(cur: &mut Params, next: &mut Params, dead: &[bool]) {
    let mut it = dead.iter();
    cur.biases.retain(|_| !*it.next().unwrap());
    let mut it = dead.iter();
    cur.labels.retain(|_| !*it.next().unwrap());
    let mut it = dead.iter();
    cur.weights.retain(|_| !*it.next().unwrap());
    for row in &mut next.weights {
        let mut it = dead.iter();
        row.retain(|_| !*it.next().unwrap());
    }
}

fn assemble(original: &Network, layers: Vec<Params>) -> Network {
    let mut next_id = 0u32;
    let out = layers
        .into_iter()
        .zip(&original.layers)
        .enumerate()
        .map(|(li, (p, orig))| {
            let neurons = p
                .labels
                .iter()
                .enumerate()
                .map(|(slot, &label)| {
                    let id = NeuronId(next_id);
                    next_id += 1;
                    NeuronMeta {
                        id,
                        layer: li,
                        slot,
                        label,
                        kind: NeuronKind::Atomic,
                        bounds: None,
                    }
                })
                .collect();
            Layer {
                weights: p.weights,
                biases: p.biases,
                activation: orig.activation,
                neurons,
            }
        })
        .collect();
    Network {
        input_dim: original.input_dim,
        layers: out,
        normalization: original.normalization.clone(),
    }
}

/// Remove hidden neurons whose outgoing weights are all zero, cascading
/// backwards. Surviving neurons keep their ids; slots are renumbered.
pub fn prune_dead(network: &Network) -> Network {
    let mut net = network.clone();
    for i in (0..net.layers.len().saturating_sub(1)).rev() {
        let (lower, upper) = net.layers.split_at_mut(i + 1);
        let (cur, next) = (&mut lower[i], &mut upper[0]);
        let dead: Vec<bool> = (0..cur.len())
            .map(|c| next.weights.iter().all(|row| row[c] == 0.0))
            .collect();
        if !dead.contains(&true) {
            continue;
        }
        let mut it = dead.iter();
        cur.weights.retain(|_| !*it.next().unwrap());
        let mut it = dead.iter();
        cur.biases.retain(|_| !*it.next().unwrap());
        let mut it = dead.iter();
        cur.neurons.retain(|_| !*it.next().unwrap());
        for row in &mut next.weights {
            let mut it = dead.iter();
            row.retain(|_| !*it.next().unwrap());
        }
    }
    for layer in &mut net.layers {
        for (slot, meta) in layer.neurons.iter_mut().enumerate() {
            meta.slot = slot;
        }
    }
    net
}
