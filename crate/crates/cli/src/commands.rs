use std::collections::BTreeMap;
use std::error::Error;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nncegar::abstraction::{propagate, run_abstraction, AbstractionConfig, AbstractionState};
use nncegar::bounds::BoundsTable;
use nncegar::model::{argmax, NeuronKind, NeuronMeta};
use nncegar::preprocess::preprocess_pruned;
use nncegar::verify::{run_engine, EngineConfig, EngineKind};
use nncegar::{
    encode_robustness, load_nnet, load_property, save_nnet, solve_traced, CegarConfig, Network, Outcome, PropertyFile,
    Summary, VerificationProblem,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::report::{ProblemReport, QueryReport, RunReport};
use crate::{AbstractArgs, BenchArgs, BoundsArgs, CheckArgs, Engine, SolverArgs, VerifyArgs};

type CliResult<T> = Result<T, Box<dyn Error>>;

enum QuerySpec {
    Property(PropertyFile),
    Robust {
        x0: Vec<f64>,
        delta: f64,
        target: Option<usize>,
        normalize: bool,
    },
}

struct Query {
    name: String,
    network: Network,
    spec: QuerySpec,
    timeout: Option<Duration>,
}

impl Query {
    /// The single-output problems of this query, tagged with the adversarial
    /// class for robustness queries.
    fn problems(&self) -> CliResult<Vec<(Option<usize>, VerificationProblem)>> {
        match &self.spec {
            QuerySpec::Property(p) => Ok(vec![(None, p.clone().into_problem(self.network.clone())?)]),
            QuerySpec::Robust {
                x0,
                delta,
                target,
                normalize,
            } => {
                let x0 = if *normalize {
                    let norm = self
                        .network
                        .normalization
                        .as_ref()
                        .ok_or("--normalize given but the network has no normalization data")?;
                    norm.normalize_input(x0)
                } else {
                    x0.clone()
                };
                let target = match target {
                    Some(t) => *t,
                    None => argmax(&self.network.evaluate(&x0)?).ok_or("network has no outputs")?,
                };
                Ok(encode_robustness(&self.network, &x0, *delta, target)?
                    .into_iter()
                    .map(|(a, p)| (Some(a), p))
                    .collect())
            }
        }
    }
}

fn engine_kind(engine: Engine, external_cmd: Option<&str>) -> CliResult<EngineKind> {
    Ok(match engine {
        Engine::Pattern => EngineKind::Pattern,
        Engine::Bab => EngineKind::Bab,
        Engine::External => EngineKind::External(
            external_cmd
                .ok_or("--engine external needs --external-cmd")?
                .to_string(),
        ),
    })
}

fn cegar_config(s: &SolverArgs) -> CliResult<CegarConfig> {
    Ok(CegarConfig {
        engine: EngineConfig {
            max_unstable: s.max_unstable,
            ..EngineConfig::with_kind(engine_kind(s.engine, s.external_cmd.as_deref())?)
        },
        sample_count: s.samples,
        seed: s.seed,
        abstraction_enabled: !s.no_abstraction,
        max_cegar_iterations: s.max_iterations,
        bounds: s.bounds.into(),
        time_budget: None,
    })
}

fn seconds(s: f64) -> CliResult<Duration> {
    Duration::try_from_secs_f64(s).map_err(|e| format!("invalid timeout {s}: {e}").into())
}

fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}:{}: {e}", path.display(), e.line()).into())
}

fn load_network(path: &Path) -> CliResult<Network> {
    load_nnet(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

/// Solve every problem of a query. Sub-problems share the query's time budget.
fn run_query(query: &Query, config: &CegarConfig, jobs: usize, trace: bool) -> QueryReport {
    let start = Instant::now();
    let problems = match query.problems() {
        Ok(p) => p,
        Err(e) => return QueryReport::failed(query.name.clone(), e.to_string()),
    };
    let solve_one = |(adversary, problem): &(Option<usize>, VerificationProblem)| -> ProblemReport {
        let config = CegarConfig {
            time_budget: query.timeout.map(|t| t.saturating_sub(start.elapsed())),
            ..config.clone()
        };
        let mut emit = |record: &nncegar::refinement::RefinementRecord| {
            if trace {
                if let Ok(line) = serde_json::to_string(record) {
                    eprintln!("{line}");
                }
            }
        };
        let summary = match solve_traced(problem, &config, &mut emit) {
            Ok(verdict) => Summary::from(&verdict),
            Err(e) => Summary {
                outcome: Outcome::unknown(format!("error: {e}")),
                iterations: 0,
                hidden_sizes: [0; 4],
                timings: Default::default(),
            },
        };
        ProblemReport {
            adversary: *adversary,
            summary,
        }
    };
    let reports = if jobs > 1 {
        match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| problems.par_iter().map(solve_one).collect()),
            Err(_) => problems.iter().map(solve_one).collect(),
        }
    } else {
        problems.iter().map(solve_one).collect()
    };
    QueryReport::from_problems(query.name.clone(), reports, start.elapsed().as_secs_f64())
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    println!("{text}");
    if let Some(path) = path {
        std::fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> CliResult<u8> {
    let network = load_network(&args.network)?;
    let spec = match (&args.property, &args.robust) {
        (Some(p), _) => QuerySpec::Property(load_property(p)?),
        (None, Some(x0)) => QuerySpec::Robust {
            x0: read_vector(x0)?,
            delta: args.delta.ok_or("--robust needs --delta")?,
            target: args.target,
            normalize: args.normalize,
        },
        (None, None) => return Err("give a property file or --robust".into()),
    };
    let query = Query {
        name: args.network.display().to_string(),
        network,
        spec,
        timeout: args.solver.timeout.map(seconds).transpose()?,
    };
    let jobs = if args.solver.deterministic { 1 } else { args.jobs.max(1) };
    let mut report = run_query(&query, &cegar_config(&args.solver)?, jobs, args.solver.trace_refinement);
    if args.solver.deterministic {
        report.strip_times();
    }
    emit_json(&report, args.report.as_deref())?;
    Ok(report.exit_code() as u8)
}

pub fn bounds(args: &BoundsArgs) -> CliResult<u8> {
    let network = load_network(&args.network)?;
    let problem = load_property(&args.property)?.into_problem(network)?;
    let pre = preprocess_pruned(&problem.network)?;
    let table = BoundsTable::compute(&pre, &problem.input_box, args.bounds.into());
    let map: BTreeMap<u32, [f64; 2]> = table.post.iter().map(|(id, &(lo, hi))| (id.0, [lo, hi])).collect();
    emit_json(&map, None)?;
    Ok(0)
}

#[derive(Serialize)]
struct AbstractionDump<'a> {
    /// `[initial, preprocessed, abstracted]`.
    hidden_sizes: [usize; 3],
    steps: &'a [nncegar::abstraction::AbstractionStep],
    /// Neurons of the dumped network, layer by layer.
    neurons: Vec<&'a NeuronMeta>,
    /// Preprocessed neurons represented by each merged neuron.
    groups: BTreeMap<u32, Vec<u32>>,
    passes_samples: bool,
}

pub fn abstract_network(args: &AbstractArgs) -> CliResult<u8> {
    let network = load_network(&args.network)?;
    let problem = load_property(&args.property)?.into_problem(network)?;
    let config = cegar_config(&args.solver)?;
    let pre = problem.with_network(preprocess_pruned(&problem.network)?);
    let bounds = BoundsTable::compute(&pre.network, &pre.input_box, config.bounds);
    let state = if config.abstraction_enabled {
        let ac = AbstractionConfig {
            sample_count: config.sample_count,
            seed: config.seed,
        };
        run_abstraction(&pre, bounds, &ac)
    } else {
        AbstractionState::new(&pre, bounds, vec![])
    };
    let abstracted = propagate(&state.current);
    let groups = abstracted
        .neurons()
        .filter(|n| matches!(n.kind, NeuronKind::Abstract(_)))
        .map(|n| (n.id.0, state.leaves_of(n.id).into_iter().map(|l| l.0).collect()))
        .collect();
    let dump = AbstractionDump {
        hidden_sizes: [problem.network.hidden_count(), pre.network.hidden_count(), abstracted.hidden_count()],
        steps: &state.log,
        neurons: abstracted.neurons().collect(),
        groups,
        passes_samples: state.passes_samples(),
    };
    if let Some(dir) = &args.dump {
        std::fs::create_dir_all(dir)?;
        save_nnet(&abstracted, dir.join("abstraction.nnet"))?;
        std::fs::write(dir.join("abstraction.json"), serde_json::to_string_pretty(&dump)? + "\n")?;
    }
    emit_json(
        &serde_json::json!({
            "hidden_sizes": dump.hidden_sizes,
            "steps": dump.steps.len(),
            "passes_samples": dump.passes_samples,
        }),
        None,
    )?;
    Ok(0)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum InputSpec {
    Values(Vec<f64>),
    File(PathBuf),
}

#[derive(Deserialize)]
struct RobustEntry {
    input: InputSpec,
    delta: f64,
    #[serde(default)]
    target: Option<usize>,
    #[serde(default)]
    normalize: bool,
}

#[derive(Deserialize)]
struct ManifestEntry {
    #[serde(default)]
    name: Option<String>,
    network: PathBuf,
    #[serde(default)]
    property: Option<PathBuf>,
    #[serde(default)]
    robust: Option<RobustEntry>,
    /// Seconds.
    #[serde(default)]
    timeout: Option<f64>,
}

fn manifest_query(entry: ManifestEntry, base: &Path, default_timeout: Option<f64>) -> CliResult<Query> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let network = load_network(&resolve(&entry.network))?;
    let spec = match (entry.property, entry.robust) {
        (Some(p), None) => QuerySpec::Property(load_property(resolve(&p))?),
        (None, Some(r)) => QuerySpec::Robust {
            x0: match r.input {
                InputSpec::Values(v) => v,
                InputSpec::File(p) => read_vector(&resolve(&p))?,
            },
            delta: r.delta,
            target: r.target,
            normalize: r.normalize,
        },
        _ => return Err("entry needs exactly one of `property` and `robust`".into()),
    };
    Ok(Query {
        name: String::new(),
        network,
        spec,
        timeout: entry.timeout.or(default_timeout).map(seconds).transpose()?,
    })
}

pub fn bench(args: &BenchArgs) -> CliResult<u8> {
    let text = std::fs::read_to_string(&args.manifest).map_err(|e| format!("{}: {e}", args.manifest.display()))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| format!("{}:{}: {e}", args.manifest.display(), e.line()))?;
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let config = cegar_config(&args.solver)?;
    let trace = args.solver.trace_refinement;

    let run = |(i, entry): (usize, ManifestEntry)| -> QueryReport {
        let name = entry.name.clone().unwrap_or_else(|| {
            let what = entry
                .property
                .as_ref()
                .map_or_else(|| "robust".to_string(), |p| p.display().to_string());
            format!("{i}:{}:{what}", entry.network.display())
        });
        match manifest_query(entry, base, args.solver.timeout) {
            Ok(mut query) => {
                query.name = name;
                run_query(&query, &config, 1, trace)
            }
            Err(e) => QueryReport::failed(name, e.to_string()),
        }
    };
    let jobs = if args.solver.deterministic { 1 } else { args.jobs.max(1) };
    let mut queries: Vec<QueryReport> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
        pool.install(|| entries.into_par_iter().enumerate().map(run).collect())
    } else {
        entries.into_iter().enumerate().map(run).collect()
    };
    if args.solver.deterministic {
        queries.iter_mut().for_each(QueryReport::strip_times);
    }
    emit_json(&RunReport::new(queries), args.report.as_deref())?;
    Ok(0)
}

pub fn check(args: &CheckArgs) -> CliResult<u8> {
    let network = load_network(&args.network)?;
    let problem = load_property(&args.property)?.into_problem(network)?;
    let config = EngineConfig {
        max_unstable: args.max_unstable,
        ..EngineConfig::with_kind(engine_kind(args.engine, None)?)
    };
    match run_engine(&problem, &config, None).outcome {
        Outcome::Holds => {
            println!("HOLDS");
            Ok(0)
        }
        Outcome::Violated { counterexample } => {
            let xs: Vec<String> = counterexample.iter().map(f64::to_string).collect();
            println!("VIOLATED {}", xs.join(","));
            Ok(0)
        }
        Outcome::Unknown { reason } => {
            println!("UNKNOWN {reason}");
            Ok(2)
        }
    }
}
