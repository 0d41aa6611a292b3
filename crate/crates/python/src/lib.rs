//! Python bindings: networks, problems, bounds, abstraction and the full
//! verification loop.

use std::collections::BTreeMap;
use std::time::Duration;

use nncegar::abstraction::{propagate, run_abstraction, AbstractionConfig};
use nncegar::bounds::{BoundsMethod, BoundsTable};
use nncegar::preprocess::preprocess_pruned;
use nncegar::{
    CegarConfig, EngineConfig, EngineKind, Halfspace, Outcome, PropertyFile, Summary, Verdict as CoreVerdict,
    VerificationProblem,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bounds_method(name: &str) -> PyResult<BoundsMethod> {
    match name {
        "symbolic" => Ok(BoundsMethod::Symbolic),
        "interval" => Ok(BoundsMethod::Interval),
        other => Err(err(format!("unknown bounds method {other:?}"))),
    }
}

#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Network {
    inner: nncegar::Network,
}

#[pymethods]
impl Network {
    /// Build from `[(weights, biases), ...]`, one pair per layer, the last
    /// pair being the affine output layer.
    #[new]
    fn new(input_dim: usize, layers: Vec<(Vec<Vec<f64>>, Vec<f64>)>) -> PyResult<Self> {
        Ok(Network {
            inner: nncegar::Network::from_parameters(input_dim, layers).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Network {
            inner: nncegar::load_nnet(path).map_err(err)?,
        })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Network {
            inner: nncegar::parse_nnet(text, "<string>").map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        nncegar::save_nnet(&self.inner, path).map_err(err)
    }

    fn to_nnet(&self) -> String {
        nncegar::write_nnet(&self.inner)
    }

    fn evaluate(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.evaluate(&x).map_err(err)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim
    }

    #[getter]
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    #[getter]
    fn hidden_count(&self) -> usize {
        self.inner.hidden_count()
    }

    /// Widths of every layer after the input, output layer included.
    #[getter]
    fn layer_sizes(&self) -> Vec<usize> {
        self.inner.layers.iter().map(|l| l.len()).collect()
    }

    /// The equivalent network with every hidden neuron split by its effect
    /// on the output.
    fn preprocess(&self) -> PyResult<Network> {
        Ok(Network {
            inner: preprocess_pruned(&self.inner).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(input_dim={}, layer_sizes={:?})",
            self.inner.input_dim,
            self.layer_sizes()
        )
    }
}

/// `y <= threshold` for every input in the box satisfying the halfspaces
/// `a . x <= b`.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Problem {
    inner: VerificationProblem,
}

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (network, input_box, threshold, halfspaces = vec![]))]
    fn new(
        network: &Network,
        input_box: Vec<(f64, f64)>,
        threshold: f64,
        halfspaces: Vec<(Vec<f64>, f64)>,
    ) -> PyResult<Self> {
        let halfspaces = halfspaces.into_iter().map(|(a, b)| Halfspace { a, b }).collect();
        Ok(Problem {
            inner: VerificationProblem::new(network.inner.clone(), input_box, halfspaces, threshold).map_err(err)?,
        })
    }

    /// Load a network file and a JSON property file.
    #[staticmethod]
    fn load(network: &str, property: &str) -> PyResult<Self> {
        let net = nncegar::load_nnet(network).map_err(err)?;
        Ok(Problem {
            inner: nncegar::load_property(property)
                .map_err(err)?
                .into_problem(net)
                .map_err(err)?,
        })
    }

    #[getter]
    fn network(&self) -> Network {
        Network {
            inner: self.inner.network.clone(),
        }
    }

    #[getter]
    fn input_box(&self) -> Vec<(f64, f64)> {
        self.inner.input_box.clone()
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    fn contains(&self, x: Vec<f64>) -> bool {
        self.inner.contains(&x, nncegar::SLACK)
    }

    fn property_json(&self) -> PyResult<String> {
        serde_json::to_string(&PropertyFile::from_problem(&self.inner)).map_err(err)
    }
}

#[pyclass(frozen, get_all)]
struct Verdict {
    /// "holds", "violated" or "unknown".
    verdict: String,
    counterexample: Option<Vec<f64>>,
    reason: Option<String>,
    /// Engine calls.
    iterations: usize,
    /// `[initial, preprocessed, abstracted, final]` hidden sizes.
    hidden_sizes: Vec<usize>,
    refinement_rounds: usize,
    total_time: f64,
    json: String,
}

impl From<CoreVerdict> for Verdict {
    fn from(v: CoreVerdict) -> Self {
        let (counterexample, reason) = match &v.outcome {
            Outcome::Holds => (None, None),
            Outcome::Violated { counterexample } => (Some(counterexample.clone()), None),
            Outcome::Unknown { reason } => (None, Some(reason.clone())),
        };
        Verdict {
            verdict: v.outcome.name().to_string(),
            counterexample,
            reason,
            iterations: v.stats.iterations,
            hidden_sizes: v.stats.hidden_sizes.to_vec(),
            refinement_rounds: v.stats.rounds.len(),
            total_time: v.stats.total_time,
            json: serde_json::to_string(&Summary::from(&v)).unwrap_or_default(),
        }
    }
}

#[pymethods]
impl Verdict {
    fn __repr__(&self) -> String {
        format!("Verdict({}, iterations={})", self.verdict, self.iterations)
    }
}

/// Post-activation bounds of the network's neurons, keyed by neuron id.
#[pyfunction]
#[pyo3(signature = (network, input_box, method = "symbolic"))]
fn bounds(network: &Network, input_box: Vec<(f64, f64)>, method: &str) -> PyResult<BTreeMap<u32, (f64, f64)>> {
    if input_box.len() != network.inner.input_dim {
        return Err(err("box dimension does not match the network"));
    }
    let table = BoundsTable::compute(&network.inner, &input_box, bounds_method(method)?);
    Ok(table.post.into_iter().map(|(id, b)| (id.0, b)).collect())
}

/// Preprocess and abstract; returns the abstract network and the number of
/// abstraction steps taken.
#[pyfunction]
#[pyo3(signature = (problem, samples = 100, seed = 0, method = "symbolic"))]
fn abstract_network(problem: &Problem, samples: usize, seed: u64, method: &str) -> PyResult<(Network, usize)> {
    let p = &problem.inner;
    let pre = p.with_network(preprocess_pruned(&p.network).map_err(err)?);
    let table = BoundsTable::compute(&pre.network, &pre.input_box, bounds_method(method)?);
    let state = run_abstraction(
        &pre,
        table,
        &AbstractionConfig {
            sample_count: samples,
            seed,
        },
    );
    Ok((
        Network {
            inner: propagate(&state.current),
        },
        state.log.len(),
    ))
}

/// Split a multi-class robustness query into `(adversarial_class, Problem)` pairs.
#[pyfunction]
fn encode_robustness(network: &Network, x0: Vec<f64>, delta: f64, target: usize) -> PyResult<Vec<(usize, Problem)>> {
    Ok(nncegar::encode_robustness(&network.inner, &x0, delta, target)
        .map_err(err)?
        .into_iter()
        .map(|(a, inner)| (a, Problem { inner }))
        .collect())
}

/// Run the full abstraction-refinement loop.
#[pyfunction]
#[pyo3(signature = (
    problem,
    engine = "bab",
    external_cmd = None,
    samples = 100,
    seed = 0,
    abstraction = true,
    bounds = "symbolic",
    timeout = None,
    max_iterations = 10_000,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &Problem,
    engine: &str,
    external_cmd: Option<String>,
    samples: usize,
    seed: u64,
    abstraction: bool,
    bounds: &str,
    timeout: Option<f64>,
    max_iterations: usize,
) -> PyResult<Verdict> {
    let kind = match (engine, external_cmd) {
        ("pattern", _) => EngineKind::Pattern,
        ("bab", _) => EngineKind::Bab,
        ("external", Some(cmd)) => EngineKind::External(cmd),
        ("external", None) => return Err(err("engine 'external' needs external_cmd")),
        (other, _) => return Err(err(format!("unknown engine {other:?}"))),
    };
    let config = CegarConfig {
        engine: EngineConfig::with_kind(kind),
        sample_count: samples,
        seed,
        abstraction_enabled: abstraction,
        max_cegar_iterations: max_iterations,
        bounds: bounds_method(bounds)?,
        time_budget: timeout.map(Duration::try_from_secs_f64).transpose().map_err(err)?,
    };
    let inner = &problem.inner;
    let verdict = py.detach(|| nncegar::solve(inner, &config)).map_err(err)?;
    Ok(verdict.into())
}

#[pymodule]
pub fn nncegar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Network>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Verdict>()?;
    m.add_function(wrap_pyfunction!(bounds, m)?)?;
    m.add_function(wrap_pyfunction!(abstract_network, m)?)?;
    m.add_function(wrap_pyfunction!(encode_robustness, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    Ok(())
}
