//! Per-neuron bounds over an input box.
//!
//! Two propagation modes are available. [`interval_bounds`] pushes plain
//! intervals through every layer. [`symbolic_bounds`] carries a lower and an
//! upper affine form in the inputs for every neuron, concretizing them over
//! the box only to decide ReLU stability; at an unstable ReLU the upper form
//! is replaced by its chord over `[min U, max U]` and the lower form by either
//! itself or zero, whichever keeps the larger area. The symbolic mode also
//! intersects with the interval result, so it is never looser.
//!
//! Reported bounds are post-activation. Pre-activation bounds are kept for
//! stability decisions in the exact engines.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::model::{Activation, Network, NeuronId};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundsMethod {
    Interval,
    Symbolic,
}

/// Pre- and post-activation bounds of one layer, in neuron order.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerBounds {
    pub pre: Vec<(f64, f64)>,
    pub post: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    /// Fingerprint of the network the table was computed on.
    pub reference: u64,
    pub method: BoundsMethod,
    pub post: BTreeMap<NeuronId, (f64, f64)>,
    pub pre: BTreeMap<NeuronId, (f64, f64)>,
}

impl BoundsTable {
    pub fn compute(network: &Network, input_box: &[(f64, f64)], method: BoundsMethod) -> BoundsTable {
        match method {
            BoundsMethod::Interval => interval_bounds(network, input_box),
            BoundsMethod::Symbolic => symbolic_bounds(network, input_box),
        }
    }

    fn from_layers(network: &Network, layers: &[LayerBounds], method: BoundsMethod) -> BoundsTable {
        let mut post = BTreeMap::new();
        let mut pre = BTreeMap::new();
        for (layer, lb) in network.layers.iter().zip(layers) {
            for (i, meta) in layer.neurons.iter().enumerate() {
                post.insert(meta.id, lb.post[i]);
                pre.insert(meta.id, lb.pre[i]);
            }
        }
        BoundsTable {
            reference: fingerprint(network),
            method,
            post,
            pre,
        }
    }

    /// Post-activation `(lb, ub)`.
    pub fn get(&self, id: NeuronId) -> Option<(f64, f64)> {
        self.post.get(&id).copied()
    }

    pub fn pre_activation(&self, id: NeuronId) -> Option<(f64, f64)> {
        self.pre.get(&id).copied()
    }

    /// Upper bound of the (single) output neuron.
    pub fn output_upper(&self, network: &Network) -> Option<f64> {
        let out = network.layers.last()?.neurons.first()?;
        self.get(out.id).map(|(_, ub)| ub)
    }
}

/// Hash of the network's shape, weights and neuron ids.
pub fn fingerprint(network: &Network) -> u64 {
    let mut h = DefaultHasher::new();
    network.input_dim.hash(&mut h);
    for layer in &network.layers {
        layer.len().hash(&mut h);
        for meta in &layer.neurons {
            meta.id.hash(&mut h);
        }
        for row in &layer.weights {
            for w in row {
                w.to_bits().hash(&mut h);
            }
        }
        for b in &layer.biases {
            b.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

pub fn interval_bounds(network: &Network, input_box: &[(f64, f64)]) -> BoundsTable {
    BoundsTable::from_layers(network, &interval_layers(network, input_box), BoundsMethod::Interval)
}

pub fn symbolic_bounds(network: &Network, input_box: &[(f64, f64)]) -> BoundsTable {
    BoundsTable::from_layers(network, &symbolic_layers(network, input_box), BoundsMethod::Symbolic)
}

fn affine_interval(row: &[f64], bias: f64, inputs: &[(f64, f64)]) -> (f64, f64) {
    let mut lo = bias;
    let mut hi = bias;
    for (&w, &(l, h)) in row.iter().zip(inputs) {
        if w >= 0.0 {
            lo += w * l;
            hi += w * h;
        } else {
            lo += w * h;
            hi += w * l;
        }
    }
    (lo, hi)
}

fn activate(act: Activation, (lo, hi): (f64, f64)) -> (f64, f64) {
    (act.apply(lo), act.apply(hi))
}

pub fn interval_layers(network: &Network, input_box: &[(f64, f64)]) -> Vec<LayerBounds> {
    let mut cur = input_box.to_vec();
    let mut out = Vec::with_capacity(network.layers.len());
    for layer in &network.layers {
        let pre: Vec<(f64, f64)> = layer
            .weights
            .iter()
            .zip(&layer.biases)
            .map(|(row, &b)| affine_interval(row, b, &cur))
            .collect();
        let post: Vec<(f64, f64)> = pre.iter().map(|&p| activate(layer.activation, p)).collect();
        cur = post.clone();
        out.push(LayerBounds { pre, post });
    }
    out
}

/// Affine form over the inputs: `coeffs · x + constant`.
#[derive(Clone, Debug)]
struct Form {
    coeffs: Vec<f64>,
    constant: f64,
}

impl Form {
    fn zero(dim: usize) -> Form {
        Form {
            coeffs: vec![0.0; dim],
            constant: 0.0,
        }
    }

    fn range(&self, input_box: &[(f64, f64)]) -> (f64, f64) {
        affine_interval(&self.coeffs, self.constant, input_box)
    }

    fn axpy(&mut self, a: f64, other: &Form) {
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += a * o;
        }
        self.constant += a * other.constant;
    }

    fn scale_shift(&mut self, scale: f64, shift: f64) {
        for c in &mut self.coeffs {
            *c *= scale;
        }
        self.constant = self.constant * scale + shift;
    }
}

pub fn symbolic_layers(network: &Network, input_box: &[(f64, f64)]) -> Vec<LayerBounds> {
    let dim = network.input_dim;
    let mut lower: Vec<Form> = (0..dim)
        .map(|i| {
            let mut f = Form::zero(dim);
            f.coeffs[i] = 1.0;
            f
        })
        .collect();
    let mut upper = lower.clone();
    let mut concrete = input_box.to_vec();
    let mut out = Vec::with_capacity(network.layers.len());

    for layer in &network.layers {
        let n = layer.len();
        let mut next_lower = Vec::with_capacity(n);
        let mut next_upper = Vec::with_capacity(n);
        let mut pre = Vec::with_capacity(n);
        let mut post = Vec::with_capacity(n);
        for (row, &b) in layer.weights.iter().zip(&layer.biases) {
            let mut lo_form = Form::zero(dim);
            let mut up_form = Form::zero(dim);
            lo_form.constant = b;
            up_form.constant = b;
            for (j, &w) in row.iter().enumerate() {
                if w > 0.0 {
                    up_form.axpy(w, &upper[j]);
                    lo_form.axpy(w, &lower[j]);
                } else if w < 0.0 {
                    up_form.axpy(w, &lower[j]);
                    lo_form.axpy(w, &upper[j]);
                }
            }
            let (sym_lo, _) = lo_form.range(input_box);
            let (_, sym_hi) = up_form.range(input_box);
            let (int_lo, int_hi) = affine_interval(row, b, &concrete);
            let p = (sym_lo.max(int_lo), sym_hi.min(int_hi));
            pre.push(p);

            match layer.activation {
                Activation::Identity => post.push(p),
                Activation::Relu if p.1 <= 0.0 => {
                    lo_form = Form::zero(dim);
                    up_form = Form::zero(dim);
                    post.push((0.0, 0.0));
                }
                Activation::Relu if p.0 >= 0.0 => post.push(p),
                Activation::Relu => {
                    let (ul, uh) = up_form.range(input_box);
                    if ul < 0.0 {
                        let lambda = uh / (uh - ul);
                        up_form.scale_shift(lambda, -lambda * ul);
                    }
                    let (ll, lh) = lo_form.range(input_box);
                    if ll < 0.0 && lh <= -ll {
                        lo_form = Form::zero(dim);
                    }
                    post.push((0.0, p.1));
                }
            }
            next_lower.push(lo_form);
            next_upper.push(up_form);
        }
        concrete = post.clone();
        lower = next_lower;
        upper = next_upper;
        out.push(LayerBounds { pre, post });
    }
    out
}

/// Sound upper bound on the single output over a box (symbolic mode).
pub fn output_upper_bound(network: &Network, input_box: &[(f64, f64)]) -> f64 {
    symbolic_layers(network, input_box)
        .last()
        .and_then(|l| l.post.first())
        .map_or(f64::NEG_INFINITY, |&(_, ub)| ub)
}

/// Centre of a post-activation interval, used as the value estimate of a neuron.
pub fn midpoint((lb, ub): (f64, f64)) -> f64 {
    0.5 * (ub + lb)
}
