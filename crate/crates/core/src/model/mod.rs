//! Network representation, evaluation and the verification-problem data model.
//!
//! A [`Network`] is a stack of fully connected layers. Every hidden layer
//! applies ReLU and the last layer is affine. Each neuron carries a
//! [`NeuronMeta`] record with a stable id, so that abstraction steps can
//! refer to neurons independently of their current position in a layer.

mod nnet;
mod property;

pub use nnet::{load_nnet, parse_nnet, save_nnet, write_nnet};
pub use property::{load_property, parse_property, PropertyFile};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NeuronId(pub u32);

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepId(pub u32);

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

/// Monotonic effect of a hidden neuron on the single network output.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Inc,
    Dec,
    None,
}

impl Label {
    /// `+1` for output-increasing neurons, `-1` for output-decreasing ones.
    /// Output neurons (label `None`) count as increasing.
    pub fn sign(self) -> f64 {
        match self {
            Label::Dec => -1.0,
            Label::Inc | Label::None => 1.0,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type", content = "step")]
pub enum NeuronKind {
    Atomic,
    /// Produced by the merge step with this id.
    Abstract(StepId),
    /// Frozen by the step with this id.
    Constant(StepId),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronMeta {
    pub id: NeuronId,
    /// Index into [`Network::layers`].
    pub layer: usize,
    /// Ordering key inside the layer. Atomic neurons keep their index in the
    /// network they were created in; merged neurons take the smallest slot of
    /// their operands.
    pub slot: usize,
    pub label: Label,
    pub kind: NeuronKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// One row per neuron of this layer, one column per neuron of the previous layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub activation: Activation,
    pub neurons: Vec<NeuronMeta>,
}

impl Layer {
    pub fn len(&self) -> usize {
        self.biases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.biases.is_empty()
    }

    pub fn position(&self, id: NeuronId) -> Option<usize> {
        self.neurons.iter().position(|n| n.id == id)
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect()
    }
}

/// Per-input normalization from an NNet header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    /// Input means followed by the output mean.
    pub means: Vec<f64>,
    /// Input ranges followed by the output range.
    pub ranges: Vec<f64>,
}

impl Normalization {
    /// Map a raw input vector into the network's native input space.
    pub fn normalize_input(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(i, &x)| {
                let x = x.clamp(self.input_min[i], self.input_max[i]);
                (x - self.means[i]) / self.ranges[i]
            })
            .collect()
    }

    /// The declared input range expressed in the network's native input space.
    pub fn native_input_range(&self) -> Vec<(f64, f64)> {
        (0..self.input_min.len())
            .map(|i| {
                let lo = (self.input_min[i] - self.means[i]) / self.ranges[i];
                let hi = (self.input_max[i] - self.means[i]) / self.ranges[i];
                (lo.min(hi), lo.max(hi))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub layers: Vec<Layer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
}

impl Network {
    /// Build a network from raw per-layer weights and biases, assigning fresh
    /// neuron ids in layer order. Hidden layers get ReLU, the last layer identity.
    pub fn from_parameters(
        input_dim: usize,
        parameters: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
    ) -> Result<Network> {
        let depth = parameters.len();
        let mut next_id = 0u32;
        let layers = parameters
            .into_iter()
            .enumerate()
            .map(|(li, (weights, biases))| {
                let last = li + 1 == depth;
                let neurons = (0..biases.len())
                    .map(|slot| {
                        let meta = NeuronMeta {
                            id: NeuronId(next_id),
                            layer: li,
                            slot,
                            label: Label::None,
                            kind: NeuronKind::Atomic,
                            bounds: None,
                        };
                        next_id += 1;
                        meta
                    })
                    .collect();
                Layer {
                    weights,
                    biases,
                    activation: if last {
                        Activation::Identity
                    } else {
                        Activation::Relu
                    },
                    neurons,
                }
            })
            .collect();
        let network = Network {
            input_dim,
            layers,
            normalization: None,
        };
        network.validate()?;
        Ok(network)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("no layers".into()));
        }
        let mut prev = self.input_dim;
        let mut seen = std::collections::HashSet::new();
        for (li, layer) in self.layers.iter().enumerate() {
            let n = layer.biases.len();
            if layer.weights.len() != n || layer.neurons.len() != n {
                return Err(Error::InvalidNetwork(format!(
                    "layer {li}: {} weight rows, {n} biases, {} neurons",
                    layer.weights.len(),
                    layer.neurons.len()
                )));
            }
            if let Some((r, row)) = layer.weights.iter().enumerate().find(|(_, r)| r.len() != prev) {
                return Err(Error::InvalidNetwork(format!(
                    "layer {li} row {r}: {} columns, previous layer has {prev} neurons",
                    row.len()
                )));
            }
            let expected = if li + 1 == self.layers.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            if layer.activation != expected {
                return Err(Error::InvalidNetwork(format!(
                    "layer {li} has activation {:?}, expected {expected:?}",
                    layer.activation
                )));
            }
            for meta in &layer.neurons {
                if meta.layer != li {
                    return Err(Error::InvalidNetwork(format!(
                        "neuron {} records layer {} but sits in layer {li}",
                        meta.id, meta.layer
                    )));
                }
                if !seen.insert(meta.id) {
                    return Err(Error::InvalidNetwork(format!("duplicate neuron id {}", meta.id)));
                }
            }
            prev = n;
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::len)
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden_layers().iter().map(Layer::len).sum()
    }

    pub fn is_output_layer(&self, layer: usize) -> bool {
        layer + 1 == self.layers.len()
    }

    /// Layer index and in-layer position of a neuron.
    pub fn locate(&self, id: NeuronId) -> Option<(usize, usize)> {
        self.layers
            .iter()
            .enumerate()
            .find_map(|(li, l)| l.position(id).map(|p| (li, p)))
    }

    pub fn meta(&self, id: NeuronId) -> Option<&NeuronMeta> {
        self.locate(id).map(|(l, p)| &self.layers[l].neurons[p])
    }

    pub fn neurons(&self) -> impl Iterator<Item = &NeuronMeta> {
        self.layers.iter().flat_map(|l| l.neurons.iter())
    }

    pub fn max_neuron_id(&self) -> Option<NeuronId> {
        self.neurons().map(|n| n.id).max()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer
                .pre_activation(&v)
                .into_iter()
                .map(|z| layer.activation.apply(z))
                .collect();
        }
        Ok(v)
    }

    /// Single-output convenience wrapper around [`Network::evaluate`].
    pub fn evaluate_scalar(&self, x: &[f64]) -> Result<f64> {
        let out = self.evaluate(x)?;
        if out.len() != 1 {
            return Err(Error::MultiOutput(out.len()));
        }
        Ok(out[0])
    }

    /// Post-activation values of every layer (the last entry is the output).
    pub fn activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(x)?;
        let mut out = Vec::with_capacity(self.layers.len());
        let mut v = x.to_vec();
        for layer in &self.layers {
            v = layer
                .pre_activation(&v)
                .into_iter()
                .map(|z| layer.activation.apply(z))
                .collect();
            out.push(v.clone());
        }
        Ok(out)
    }

    /// Post-activation value of every neuron, keyed by id.
    pub fn neuron_values(&self, x: &[f64]) -> Result<std::collections::HashMap<NeuronId, f64>> {
        let acts = self.activations(x)?;
        Ok(self
            .layers
            .iter()
            .zip(&acts)
            .flat_map(|(l, a)| l.neurons.iter().map(|m| m.id).zip(a.iter().copied()))
            .collect())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Weight-for-weight equality that distinguishes `0.0` from `-0.0` and
    /// compares neuron metadata (ids, labels, kinds) as well.
    pub fn bitwise_eq(&self, other: &Network) -> bool {
        fn same(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        self.input_dim == other.input_dim
            && self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.activation == b.activation
                    && same(&a.biases, &b.biases)
                    && a.weights.len() == b.weights.len()
                    && a.weights.iter().zip(&b.weights).all(|(r, s)| same(r, s))
                    && a.neurons.len() == b.neurons.len()
                    && a.neurons.iter().zip(&b.neurons).all(|(m, n)| {
                        m.id == n.id && m.label == n.label && m.kind == n.kind && m.slot == n.slot
                    })
            })
    }
}

/// A linear constraint `a · x <= b` over the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn holds(&self, x: &[f64], slack: f64) -> bool {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() <= self.b + slack
    }
}

/// Does `y <= threshold` hold for every input in the box that satisfies the halfspaces?
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationProblem {
    pub network: Network,
    pub input_box: Vec<(f64, f64)>,
    pub halfspaces: Vec<Halfspace>,
    pub threshold: f64,
}

impl VerificationProblem {
    pub fn new(
        network: Network,
        input_box: Vec<(f64, f64)>,
        halfspaces: Vec<Halfspace>,
        threshold: f64,
    ) -> Result<Self> {
        let problem = VerificationProblem {
            network,
            input_box,
            halfspaces,
            threshold,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        if self.network.output_dim() != 1 {
            return Err(Error::MultiOutput(self.network.output_dim()));
        }
        if self.input_box.len() != self.network.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.network.input_dim,
                got: self.input_box.len(),
            });
        }
        for (i, &(lo, hi)) in self.input_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidProblem(format!("input {i}: bad interval [{lo}, {hi}]")));
            }
        }
        for h in &self.halfspaces {
            if h.a.len() != self.network.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.network.input_dim,
                    got: h.a.len(),
                });
            }
        }
        if !self.threshold.is_finite() {
            return Err(Error::InvalidProblem("threshold is not finite".into()));
        }
        Ok(())
    }

    /// Membership in the input property, with absolute slack.
    pub fn contains(&self, x: &[f64], slack: f64) -> bool {
        x.len() == self.input_box.len()
            && x
                .iter()
                .zip(&self.input_box)
                .all(|(v, (lo, hi))| *v >= lo - slack && *v <= hi + slack)
            && self.halfspaces.iter().all(|h| h.holds(x, slack))
    }

    pub fn with_box(&self, input_box: Vec<(f64, f64)>) -> VerificationProblem {
        VerificationProblem {
            network: self.network.clone(),
            input_box,
            halfspaces: self.halfspaces.clone(),
            threshold: self.threshold,
        }
    }

    pub fn with_network(&self, network: Network) -> VerificationProblem {
        VerificationProblem {
            network,
            input_box: self.input_box.clone(),
            halfspaces: self.halfspaces.clone(),
            threshold: self.threshold,
        }
    }
}

/// Absolute slack used by every soundness comparison.
pub const SLACK: f64 = 1e-9;

/// Split a multi-class robustness query into one single-output problem per
/// adversarial class. Problem `a` asks whether `out_a - out_target <= 0` on the
/// L∞ ball of radius `delta` around `x0` (clipped to the declared input range).
pub fn encode_robustness(
    network: &Network,
    x0: &[f64],
    delta: f64,
    target: usize,
) -> Result<Vec<(usize, VerificationProblem)>> {
    let outputs = network.output_dim();
    if target >= outputs {
        return Err(Error::TargetOutOfRange { target, outputs });
    }
    if x0.len() != network.input_dim {
        return Err(Error::DimensionMismatch {
            expected: network.input_dim,
            got: x0.len(),
        });
    }
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::InvalidProblem(format!("delta must be non-negative, got {delta}")));
    }
    let declared = network.normalization.as_ref().map(Normalization::native_input_range);
    let input_box: Vec<(f64, f64)> = x0
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (mut lo, mut hi) = (x - delta, x + delta);
            if let Some(range) = &declared {
                lo = lo.max(range[i].0);
                hi = hi.min(range[i].1);
                if lo > hi {
                    lo = x;
                    hi = x;
                }
            }
            (lo, hi)
        })
        .collect();

    let last = network.layers.last().expect("validated network has layers");
    let prev_next_id = network.max_neuron_id().map_or(0, |id| id.0 + 1);
    let mut problems = Vec::with_capacity(outputs - 1);
    for adversary in (0..outputs).filter(|&a| a != target) {
        let row: Vec<f64> = last.weights[adversary]
            .iter()
            .zip(&last.weights[target])
            .map(|(a, t)| a - t)
            .collect();
        let bias = last.biases[adversary] - last.biases[target];
        let mut net = network.clone();
        let out_layer = net.layers.len() - 1;
        let out = net.layers.last_mut().unwrap();
        out.weights = vec![row];
        out.biases = vec![bias];
        out.neurons = vec![NeuronMeta {
            id: NeuronId(prev_next_id),
            layer: out_layer,
            slot: 0,
            label: Label::None,
            kind: NeuronKind::Atomic,
            bounds: None,
        }];
        problems.push((adversary, VerificationProblem::new(net, input_box.clone(), vec![], 0.0)?));
    }
    Ok(problems)
}

/// Index of the largest output (first one on ties).
pub fn argmax(values: &[f64]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, &v)| match best {
            Some((_, bv)) if bv >= v => best,
            _ => Some((i, v)),
        })
        .map(|(i, _)| i)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "verdict")]
pub enum Outcome {
    Holds,
    Violated { counterexample: Vec<f64> },
    Unknown { reason: String },
}

impl Outcome {
    pub fn unknown(reason: impl Into<String>) -> Outcome {
        Outcome::Unknown {
            reason: reason.into(),
        }
    }

    pub fn is_definite(&self) -> bool {
        !matches!(self, Outcome::Unknown { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Outcome::Holds => "holds",
            Outcome::Violated { .. } => "violated",
            Outcome::Unknown { .. } => "unknown",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub preprocess: f64,
    pub bounds: f64,
    pub abstraction: f64,
    pub verify: Vec<f64>,
    pub refine: Vec<f64>,
    pub total: f64,
}

/// One refinement round: the spurious counterexample and how the abstraction
/// looked at it before and after refining.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementRound {
    pub counterexample: Vec<f64>,
    pub abstract_output_before: f64,
    pub abstract_output_after: f64,
    pub original_output: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    /// Number of engine calls.
    pub iterations: usize,
    /// Hidden size of the network handed to the engine, per call.
    pub abstract_size_history: Vec<usize>,
    /// `[initial, preprocessed, abstracted, final]`.
    pub hidden_sizes: [usize; 4],
    pub engine_time: f64,
    pub total_time: f64,
    pub timings: Timings,
    pub rounds: Vec<RefinementRound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub stats: Stats,
}

impl Verdict {
    pub fn new(outcome: Outcome) -> Verdict {
        Verdict {
            outcome,
            stats: Stats::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn chain_example() -> Network {
        Network::from_parameters(
            1,
            vec![
                (vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]),
                (vec![vec![3.0, 1.0], vec![1.0, 2.0]], vec![0.0, 0.0]),
                (vec![vec![1.0, 1.0]], vec![0.0]),
            ],
        )
        .unwrap()
    }

    fn naive_eval(params: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for (i, (w, b)) in params.iter().enumerate() {
            let mut next = vec![0.0; b.len()];
            for r in 0..b.len() {
                let mut acc = b[r];
                for c in 0..cur.len() {
                    acc += w[r][c] * cur[c];
                }
                next[r] = if i + 1 < params.len() && acc < 0.0 { 0.0 } else { acc };
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn chain_example_hand_evaluation() {
        let net = chain_example();
        let acts = net.activations(&[1.0]).unwrap();
        assert_eq!(acts[1], vec![4.0, 3.0]);
        assert_eq!(net.evaluate(&[1.0]).unwrap(), vec![7.0]);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::from_parameters(
            3,
            vec![(vec![vec![0.0; 3]; 4], vec![0.0; 4]), (vec![vec![0.0; 4]], vec![0.0])],
        )
        .unwrap();
        assert_eq!(net.evaluate(&[1.0, -7.0, 3.5]).unwrap(), vec![0.0]);
    }

    #[test]
    fn agrees_with_naive_evaluator() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let params: Vec<(Vec<Vec<f64>>, Vec<f64>)> = vec![
            (
                (0..6).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
                (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ),
            (
                (0..3).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
                (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            ),
        ];
        let net = Network::from_parameters(4, params.clone()).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = net.evaluate(&x).unwrap();
            let b = naive_eval(&params, &x);
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = chain_example().evaluate(&[1.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, got: 2 }));
    }

    #[test]
    fn rejects_bad_shapes() {
        let err = Network::from_parameters(2, vec![(vec![vec![1.0]], vec![0.0])]).unwrap_err();
        assert!(matches!(err, Error::InvalidNetwork(_)));
    }

    fn three_class() -> Network {
        Network::from_parameters(
            2,
            vec![
                (vec![vec![1.0, -1.0], vec![0.5, 1.0], vec![-1.0, 0.3]], vec![0.1, 0.0, 0.2]),
                (
                    vec![vec![1.0, 0.2, -0.5], vec![-0.4, 1.0, 0.1], vec![0.3, -0.2, 1.0]],
                    vec![0.0, 0.05, -0.1],
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn robustness_encoding_computes_margins() {
        let net = three_class();
        let x0 = [0.4, -0.2];
        let problems = encode_robustness(&net, &x0, 0.1, 0).unwrap();
        assert_eq!(problems.len(), 2);
        for (a, p) in &problems {
            assert_eq!(p.network.output_dim(), 1);
            for x in [[0.35, -0.25], [0.5, -0.1], [0.4, -0.2]] {
                let full = net.evaluate(&x).unwrap();
                let m = p.network.evaluate_scalar(&x).unwrap();
                assert!((m - (full[*a] - full[0])).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn robustness_target_out_of_range() {
        let err = encode_robustness(&three_class(), &[0.0, 0.0], 0.1, 3).unwrap_err();
        assert!(matches!(err, Error::TargetOutOfRange { target: 3, outputs: 3 }));
    }

    #[test]
    fn ten_classes_give_nine_problems() {
        let net = Network::from_parameters(
            2,
            vec![(vec![vec![1.0, 1.0]; 4], vec![0.0; 4]), (vec![vec![0.1; 4]; 10], vec![0.0; 10])],
        )
        .unwrap();
        assert_eq!(encode_robustness(&net, &[0.0, 0.0], 0.1, 4).unwrap().len(), 9);
    }

    #[test]
    fn zero_delta_gives_point_box() {
        let problems = encode_robustness(&three_class(), &[0.4, -0.2], 0.0, 0).unwrap();
        for (_, p) in problems {
            assert!(p.input_box.iter().zip([0.4, -0.2]).all(|(&(lo, hi), x)| lo == x && hi == x));
        }
    }

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[]), None);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let net = three_class();
        let a = net.evaluate(&[0.123, 0.456]).unwrap();
        let b = net.evaluate(&[0.123, 0.456]).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
