use crate::model::{NeuronId, StepId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("network has {0} outputs, expected exactly one")]
    MultiOutput(usize),

    #[error("target class {target} out of range for {outputs} outputs")]
    TargetOutOfRange { target: usize, outputs: usize },

    #[error("unknown neuron {0}")]
    UnknownNeuron(NeuronId),

    #[error("cannot merge {0} and {1}: labels differ")]
    LabelMismatch(NeuronId, NeuronId),

    #[error("cannot merge {0} and {1}: different layers")]
    CrossLayer(NeuronId, NeuronId),

    #[error("neuron {0} is constant")]
    ConstantOperand(NeuronId),

    #[error("neuron {0} is not a hidden neuron")]
    NotHidden(NeuronId),

    #[error("neuron {0} is not atomic")]
    NonAtomic(NeuronId),

    #[error("no bounds recorded for neuron {0}")]
    MissingBounds(NeuronId),

    #[error("invalid step: {0}")]
    InvalidStep(String),

    #[error("no eligible abstraction step")]
    NoCandidate,

    #[error("unknown abstraction step {0}")]
    UnknownStep(StepId),

    #[error("abstraction step {0} is not available for refinement")]
    StepNotAvailable(StepId),

    #[error("counterexample is not spurious: original {original}, abstract {abstracted}, threshold {threshold}")]
    NotSpurious {
        original: f64,
        abstracted: f64,
        threshold: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
