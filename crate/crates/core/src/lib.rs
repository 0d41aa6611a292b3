//! Counterexample-guided abstraction refinement for exact verification of
//! fully connected ReLU networks.
//!
//! A [`VerificationProblem`] asks whether a single-output network stays at or
//! below a threshold on a box of inputs (optionally cut by halfspaces). The
//! pipeline classifies neurons ([`preprocess`]), computes bounds once
//! ([`bounds`]), shrinks the network by merging and freezing neurons
//! ([`abstraction`]), hands the small network to an exact engine
//! ([`verify`]) and, on a spurious counterexample, undoes abstraction steps
//! chosen by the counterexample ([`refinement`]). [`cegar::solve`] drives the
//! loop.

pub mod abstraction;
pub mod bounds;
pub mod cegar;
pub mod error;
pub mod generators;
pub mod model;
pub mod preprocess;
pub mod refinement;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    encode_robustness, load_nnet, load_property, parse_nnet, parse_property, save_nnet, write_nnet, Halfspace, Label,
    Network, NeuronId, NeuronKind, Outcome, PropertyFile, Stats, StepId, Verdict, VerificationProblem, SLACK,
};
pub use cegar::{solve, solve_traced, CegarConfig, Summary};
pub use verify::{EngineConfig, EngineKind};
