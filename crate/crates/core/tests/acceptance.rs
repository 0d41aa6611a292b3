//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion.
//!
//! Run with `cargo test -p nncegar --test acceptance -- --nocapture` (the
//! harness is custom, so output is always shown). Criteria that need data not
//! shipped with the repository report `FAIL (unavailable)` without failing the
//! process; every other failure makes the target exit non-zero.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nncegar::abstraction::{propagate, replay, Action, AbstractionState};
use nncegar::bounds::symbolic_bounds;
use nncegar::generators::{network_with_widths, random_box, random_network, random_problem, sample_box};
use nncegar::model::{argmax, NeuronId, NeuronKind};
use nncegar::preprocess::preprocess_pruned;
use nncegar::refinement::{implicit_order, refine_step, DependencyGraph};
use nncegar::verify::pattern::unstable_count;
use nncegar::verify::{is_counterexample, pattern_enum_verify};
use nncegar::{
    encode_robustness, load_nnet, solve, CegarConfig, EngineConfig, EngineKind, Error, Network, Outcome,
    VerificationProblem,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Status {
    Pass(String),
    Fail(String),
    Unavailable(String),
}

type Check = fn() -> Status;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration, detail: String) -> Status {
    let took = start.elapsed();
    if took <= limit {
        Status::Pass(format!("{detail}; {:.2?}", took))
    } else {
        Status::Fail(format!("{detail}; took {:.2?}, limit {:.0?}", took, limit))
    }
}

fn status(start: Instant, limit: Duration, r: Result<String, String>) -> Status {
    match r {
        Ok(detail) => within(start, limit, detail),
        Err(e) => Status::Fail(e),
    }
}

// ---------------------------------------------------------------------------
// Fixtures

fn split_example() -> Network {
    Network::from_parameters(
        2,
        vec![
            (vec![vec![4.0, 2.0], vec![1.0, -1.0]], vec![-1.0, 0.5]),
            (vec![vec![2.0, 1.0], vec![4.0, -2.0], vec![-1.0, 3.0]], vec![0.0, 0.0, 0.0]),
            (vec![vec![2.0, -1.0, 3.0]], vec![0.0]),
        ],
    )
    .unwrap()
}

fn merge_example() -> VerificationProblem {
    let net = Network::from_parameters(
        2,
        vec![
            (vec![vec![1.0, -1.0], vec![4.0, -3.0], vec![2.0, -2.0]], vec![1.0, 2.0, 0.0]),
            (vec![vec![2.0, 1.0, 1.0]], vec![0.0]),
        ],
    )
    .unwrap();
    let pre = preprocess_pruned(&net).unwrap();
    VerificationProblem::new(pre, vec![(0.0, 1.0), (0.0, 1.0)], vec![], 100.0).unwrap()
}

fn chain_example() -> VerificationProblem {
    let net = Network::from_parameters(
        1,
        vec![
            (vec![vec![1.0], vec![1.0]], vec![0.0, 0.0]),
            (vec![vec![3.0, 1.0], vec![1.0, 2.0]], vec![0.0, 0.0]),
            (vec![vec![1.0, 1.0]], vec![0.0]),
        ],
    )
    .unwrap();
    let pre = preprocess_pruned(&net).unwrap();
    VerificationProblem::new(pre, vec![(0.0, 1.0)], vec![], 100.0).unwrap()
}

fn state_for(p: &VerificationProblem) -> AbstractionState {
    AbstractionState::new(p, symbolic_bounds(&p.network, &p.input_box), vec![])
}

/// Apply up to `max_steps` uniformly chosen legal steps.
fn random_steps(s: &mut AbstractionState, rng: &mut ChaCha8Rng, max_steps: usize) {
    for _ in 0..max_steps {
        let mut actions = Vec::new();
        for l in s.current.hidden_layers() {
            for (i, a) in l.neurons.iter().enumerate() {
                if matches!(a.kind, NeuronKind::Constant(_)) {
                    continue;
                }
                if a.kind == NeuronKind::Atomic {
                    actions.push(Action::Freeze(a.id));
                }
                for b in &l.neurons[i + 1..] {
                    if b.label == a.label && !matches!(b.kind, NeuronKind::Constant(_)) {
                        actions.push(Action::Merge(a.id, b.id));
                    }
                }
            }
        }
        if actions.is_empty() {
            return;
        }
        let pick = actions[rng.gen_range(0..actions.len())];
        s.apply(pick).unwrap();
    }
}

/// The shared random corpus: networks with at most three hidden layers plus
/// the output layer, at most ten neurons per layer.
fn corpus(seed: u64, count: usize) -> Vec<(Network, VerificationProblem)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dim = rng.gen_range(1..=4);
            let net = random_network(&mut rng, dim, 3, 10);
            let input_box = random_box(&mut rng, dim);
            let pre = preprocess_pruned(&net).unwrap();
            let problem = VerificationProblem::new(pre, input_box, vec![], 0.0).unwrap();
            (net, problem)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Criteria

fn check_split_example() -> Status {
    let start = Instant::now();
    let r = (|| {
        let net = preprocess_pruned(&split_example()).map_err(|e| e.to_string())?;
        let first = &net.layers[0];
        let second = &net.layers[1];
        for c in 0..2 {
            ensure(first.weights[c] == vec![4.0, 2.0], format!("copy {c} incoming {:?}", first.weights[c]))?;
            ensure(first.biases[c].to_bits() == (-1.0f64).to_bits(), format!("copy {c} bias {}", first.biases[c]))?;
        }
        let col = |c: usize| second.weights.iter().map(|r| r[c]).collect::<Vec<_>>();
        ensure(col(0) == vec![2.0, 0.0, 0.0], format!("Inc copy outgoing {:?}", col(0)))?;
        ensure(col(1) == vec![0.0, 4.0, -1.0], format!("Dec copy outgoing {:?}", col(1)))?;
        Ok("split copies (4,2)/-1 with outgoing 2 and 4,-1".to_string())
    })();
    status(start, Duration::from_secs(1), r)
}

fn check_merge_example() -> Status {
    let start = Instant::now();
    let r = (|| {
        let p = merge_example();
        let mut s = state_for(&p);
        let m = s.merge(NeuronId(0), NeuronId(1)).map_err(|e| e.to_string())?;
        let (l, pos) = s.current.locate(m).ok_or("merged neuron missing")?;
        let w = &s.current.layers[l].weights[pos];
        ensure(w[0] == 4.0, format!("merged incoming weight {}", w[0]))?;
        ensure(s.current.layers[l].biases[pos] == 2.0, "merged bias")?;
        ensure(s.current.layers[l + 1].weights[0][pos] == 3.0, "merged outgoing weight")?;

        let mut f = state_for(&p);
        ensure(f.bounds.get(NeuronId(0)) == Some((0.0, 2.0)), "v1 range")?;
        f.qfreeze(NeuronId(0)).map_err(|e| e.to_string())?;
        let (l, pos) = f.current.locate(NeuronId(0)).ok_or("frozen neuron missing")?;
        ensure(f.current.layers[l].biases[pos] == 2.0, "frozen bias")?;
        let prop = propagate(&f.current);
        ensure(prop.layers[1].biases[0] == 4.0, format!("output bias {}", prop.layers[1].biases[0]))?;
        Ok("merge 4/2/3, freeze bias 2, propagated output bias 4".to_string())
    })();
    status(start, Duration::from_secs(1), r)
}

fn check_chain_example() -> Status {
    let start = Instant::now();
    let r = (|| {
        let p = chain_example();
        let middle = |n: &Network| n.layers[1].weights[0][0];
        let mut a = state_for(&p);
        a.merge(NeuronId(2), NeuronId(3)).map_err(|e| e.to_string())?;
        a.merge(NeuronId(0), NeuronId(1)).map_err(|e| e.to_string())?;
        let mut b = state_for(&p);
        b.merge(NeuronId(0), NeuronId(1)).map_err(|e| e.to_string())?;
        b.merge(NeuronId(2), NeuronId(3)).map_err(|e| e.to_string())?;
        ensure(middle(&a.current) == 5.0, format!("order A middle weight {}", middle(&a.current)))?;
        ensure(middle(&b.current) == 4.0, format!("order B middle weight {}", middle(&b.current)))?;
        let dg = DependencyGraph::build(&implicit_order(&a.log));
        let first = a.log.iter().find(|s| s.id == dg.available()[0]).unwrap();
        ensure(dg.available().len() == 1, format!("available {:?}", dg.available()))?;
        ensure(
            matches!(first.kind, nncegar::abstraction::StepKind::Merge { left: NeuronId(0), right: NeuronId(1), .. }),
            "first refinement is not Merge(v1,v2)",
        )?;
        Ok("middle weights 5 and 4; only Merge(v1,v2) available".to_string())
    })();
    status(start, Duration::from_secs(1), r)
}

fn over_approximation() -> Status {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2001);
    let mut failures = 0;
    let mut checks = 0;
    for (net, p) in corpus(1001, 100) {
        for _ in 0..20 {
            let mut s = state_for(&p);
            let steps = rng.gen_range(1..=40);
            random_steps(&mut s, &mut rng, steps);
            let abs = propagate(&s.current);
            for x in sample_box(&mut rng, &p.input_box, 200) {
                checks += 1;
                if abs.evaluate_scalar(&x).unwrap() < net.evaluate_scalar(&x).unwrap() - 1e-6 {
                    failures += 1;
                }
            }
        }
    }
    let detail = format!("{checks} samples, {failures} failures");
    if failures > 0 {
        return Status::Fail(detail);
    }
    within(start, Duration::from_secs(120), detail)
}

fn preprocessing_equivalence() -> Status {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2002);
    let mut failures = 0;
    for (net, p) in corpus(1001, 100) {
        if p.network.hidden_count() > 2 * net.hidden_count() {
            failures += 1;
        }
        for x in sample_box(&mut rng, &p.input_box, 200) {
            let y = net.evaluate_scalar(&x).unwrap();
            if (p.network.evaluate_scalar(&x).unwrap() - y).abs() > 1e-6 * (1.0 + y.abs()) {
                failures += 1;
            }
        }
    }
    let detail = format!("100 networks x 200 samples, {failures} failures");
    if failures > 0 {
        return Status::Fail(detail);
    }
    within(start, Duration::from_secs(120), detail)
}

fn permutation() -> Status {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2003);
    let mut failures = 0;
    for (_, p) in corpus(1003, 100) {
        let mut s = state_for(&p);
        random_steps(&mut s, &mut rng, 25);
        match replay(&p.network, &s.origin(), &implicit_order(&s.log)) {
            Ok(n) if n.bitwise_eq(&s.current) => {}
            _ => failures += 1,
        }
    }
    let detail = format!("100 logs, {failures} failures");
    if failures > 0 {
        return Status::Fail(detail);
    }
    within(start, Duration::from_secs(60), detail)
}

fn sandwich() -> Status {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2004);
    let mut failures = 0;
    let mut cases = 0;
    let (mut attempts, mut rejected) = (0, 0);
    for (net, p) in corpus(1004, 300) {
        if cases == 100 {
            break;
        }
        let mut s = state_for(&p);
        random_steps(&mut s, &mut rng, 25);
        if s.log.is_empty() {
            continue;
        }
        cases += 1;
        let mut dg = DependencyGraph::build(&implicit_order(&s.log));

        for step in s.log.clone() {
            if dg.is_available(step.id) {
                continue;
            }
            attempts += 1;
            let before = s.current.clone();
            let log_len = s.log.len();
            if matches!(refine_step(&mut s, &mut dg, step.id), Err(Error::StepNotAvailable(_)))
                && s.current.bitwise_eq(&before)
                && s.log.len() == log_len
            {
                rejected += 1;
            }
        }

        let available = dg.available();
        let pick = available[rng.gen_range(0..available.len())];
        let coarse = propagate(&s.current);
        refine_step(&mut s, &mut dg, pick).unwrap();
        let fine = propagate(&s.current);
        for x in sample_box(&mut rng, &p.input_box, 200) {
            let (a, b, c) = (
                coarse.evaluate_scalar(&x).unwrap(),
                fine.evaluate_scalar(&x).unwrap(),
                net.evaluate_scalar(&x).unwrap(),
            );
            if a < b - 1e-6 || b < c - 1e-6 {
                failures += 1;
            }
        }
    }
    let detail = format!(
        "{cases} cases, {failures} sandwich failures, {rejected}/{attempts} unavailable steps rejected"
    );
    if failures > 0 || cases < 100 || attempts == 0 || rejected != attempts {
        return Status::Fail(detail);
    }
    within(start, Duration::from_secs(120), detail)
}

fn full_refinement_identity() -> Status {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2005);
    let mut failures = 0;
    for (_, p) in corpus(1005, 100) {
        let mut s = state_for(&p);
        random_steps(&mut s, &mut rng, 30);
        let mut dg = DependencyGraph::build(&implicit_order(&s.log));
        while !dg.is_empty() {
            let available = dg.available();
            let pick = available[rng.gen_range(0..available.len())];
            refine_step(&mut s, &mut dg, pick).unwrap();
        }
        if !s.current.bitwise_eq(&p.network) || !s.log.is_empty() {
            failures += 1;
        }
    }
    let detail = format!("100 cases, {failures} failures");
    if failures > 0 {
        return Status::Fail(detail);
    }
    within(start, Duration::from_secs(60), detail)
}

struct EndToEnd {
    status: Status,
    exclusion: Status,
}

fn end_to_end() -> EndToEnd {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2006);
    let config = CegarConfig {
        engine: EngineConfig {
            max_unstable: 40,
            ..EngineConfig::with_kind(EngineKind::Bab)
        },
        ..CegarConfig::default()
    };
    let (mut cases, mut agree, mut bad_ce) = (0, 0, 0);
    let (mut holds, mut violated) = (0, 0);
    let (mut refined_runs, mut rounds, mut not_excluded) = (0, 0, 0);
    let mut disagreements = Vec::new();
    while cases < 200 {
        let dim = rng.gen_range(1..=3);
        let mut p = random_problem(&mut rng, dim, 3, 8);
        if rng.gen_bool(0.7) {
            // Threshold between the sampled maximum and the bound-derived
            // maximum: the abstraction has room to grow, so spurious
            // counterexamples and refinement are common.
            let max = sample_box(&mut rng, &p.input_box, 400)
                .iter()
                .map(|x| p.network.evaluate_scalar(x).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            let ub = symbolic_bounds(&p.network, &p.input_box).output_upper(&p.network).unwrap();
            p.threshold = max + rng.gen_range(0.0..0.5) * (ub - max).max(0.0);
        }
        let pre = p.with_network(preprocess_pruned(&p.network).unwrap());
        if unstable_count(&pre) > 12 {
            continue;
        }
        cases += 1;
        let direct = pattern_enum_verify(&pre, 40, None);
        // Fewer samples let the abstraction go further, which exercises
        // refinement; the verdict must not depend on it.
        let config = CegarConfig {
            sample_count: if cases % 2 == 0 { 100 } else { 5 },
            seed: cases as u64,
            ..config.clone()
        };
        let verdict = solve(&p, &config).unwrap();
        if verdict.outcome.name() == direct.outcome.name() && direct.outcome.is_definite() {
            agree += 1;
        } else if disagreements.len() < 3 {
            disagreements.push(format!("{} vs {}", verdict.outcome.name(), direct.outcome.name()));
        }
        match &verdict.outcome {
            Outcome::Holds => holds += 1,
            Outcome::Violated { counterexample } => {
                violated += 1;
                if !is_counterexample(&p, counterexample) {
                    bad_ce += 1;
                }
            }
            Outcome::Unknown { .. } => {}
        }
        if !verdict.stats.rounds.is_empty() {
            refined_runs += 1;
        }
        for round in &verdict.stats.rounds {
            rounds += 1;
            if round.abstract_output_after > p.threshold + 1e-9 {
                not_excluded += 1;
            }
        }
    }
    let detail = format!(
        "{agree}/{cases} agree ({holds} holds, {violated} violated), {bad_ce} invalid counterexamples{}",
        if disagreements.is_empty() {
            String::new()
        } else {
            format!("; e.g. {}", disagreements.join(", "))
        }
    );
    let status = if agree == cases && bad_ce == 0 {
        within(start, Duration::from_secs(600), detail)
    } else {
        Status::Fail(detail)
    };
    let detail = format!("{rounds} rounds in {refined_runs} refined runs, {not_excluded} not excluded");
    let exclusion = if not_excluded == 0 && rounds > 0 {
        Status::Pass(detail)
    } else {
        Status::Fail(detail)
    };
    EndToEnd { status, exclusion }
}

fn acas_dir() -> PathBuf {
    std::env::var_os("ACASXU_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/acasxu"))
}

fn acas() -> Status {
    let dir = acas_dir();
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map(|rd| {
            rd.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "nnet"))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    if files.len() < 5 {
        return Status::Unavailable(format!(
            "found {} ACAS Xu networks in {}, need 5 (set ACASXU_DIR)",
            files.len(),
            dir.display()
        ));
    }
    let config = CegarConfig {
        time_budget: Some(Duration::from_secs(600)),
        ..CegarConfig::default()
    };
    let (mut definite, mut queries) = (0, 0);
    let mut problems = Vec::new();
    for path in files.iter().take(5) {
        let net = match load_nnet(path) {
            Ok(n) => n,
            Err(e) => return Status::Fail(format!("{}: {e}", path.display())),
        };
        let Some(norm) = &net.normalization else {
            return Status::Fail(format!("{}: no normalization header", path.display()));
        };
        let x0: Vec<f64> = norm.native_input_range().iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let target = argmax(&net.evaluate(&x0).unwrap()).unwrap();
        let sub = encode_robustness(&net, &x0, 0.01, target).unwrap();
        queries += 1;
        let start = Instant::now();
        let mut all_definite = true;
        let mut any_violated = false;
        for (_, p) in &sub {
            let v = solve(p, &config).unwrap();
            let [_, pre, abs, _] = v.stats.hidden_sizes;
            if v.stats.iterations > 0 && abs >= pre {
                problems.push(format!("{}: abstracted {abs} >= preprocessed {pre}", path.display()));
            }
            match v.outcome {
                Outcome::Violated { .. } => any_violated = true,
                Outcome::Unknown { .. } => all_definite = false,
                Outcome::Holds => {}
            }
        }
        if (all_definite || any_violated) && start.elapsed() <= Duration::from_secs(600) {
            definite += 1;
        }
    }
    let detail = format!("{definite}/{queries} queries definite");
    if problems.is_empty() && definite >= 3 {
        Status::Pass(detail)
    } else {
        Status::Fail(format!("{detail}; {}", problems.join("; ")))
    }
}

/// Same query shape on random networks with the ACAS Xu architecture (5
/// inputs, six hidden layers of 50, 5 outputs). Informational only.
fn acas_shaped() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2007);
    let config = CegarConfig {
        time_budget: Some(Duration::from_secs(20)),
        ..CegarConfig::default()
    };
    let mut lines = Vec::new();
    for i in 0..3 {
        let net = network_with_widths(&mut rng, 5, &[50; 6], 5);
        let x0: Vec<f64> = (0..5).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let target = argmax(&net.evaluate(&x0).unwrap()).unwrap();
        let start = Instant::now();
        let mut verdicts = Vec::new();
        let (mut pre, mut abs) = (0, 0);
        for (_, p) in encode_robustness(&net, &x0, 0.01, target).unwrap() {
            let v = solve(&p, &config).unwrap();
            pre += v.stats.hidden_sizes[1];
            abs += v.stats.hidden_sizes[2];
            verdicts.push(v.outcome.name());
        }
        lines.push(format!(
            "net {i}: {:?}, mean size {} -> {}, {:.2?}",
            verdicts,
            pre / 4,
            abs / 4,
            start.elapsed()
        ));
    }
    lines.join("\n      ")
}

fn run(name: &str, check: impl FnOnce() -> Status) -> Option<bool> {
    let s = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Status::Fail(format!("panicked: {msg}"))
    });
    match s {
        Status::Pass(d) => {
            println!("PASS  {name:<28} {d}");
            Some(true)
        }
        Status::Fail(d) => {
            println!("FAIL  {name:<28} {d}");
            Some(false)
        }
        Status::Unavailable(d) => {
            println!("FAIL  {name:<28} (unavailable) {d}");
            None
        }
    }
}

fn main() {
    let checks: [(&str, Check); 8] = [
        ("golden-preprocessing", check_split_example),
        ("golden-merge-freeze", check_merge_example),
        ("golden-merge-order", check_chain_example),
        ("over-approximation", over_approximation),
        ("preprocessing-equivalence", preprocessing_equivalence),
        ("permutation", permutation),
        ("refinement-sandwich", sandwich),
        ("full-refinement-identity", full_refinement_identity),
    ];
    let mut results: Vec<Option<bool>> = checks.iter().map(|(name, check)| run(name, check)).collect();
    let mut e2e = None;
    results.push(run("end-to-end-completeness", || {
        let r = end_to_end();
        let status = r.status;
        e2e = Some(r.exclusion);
        status
    }));
    results.push(run("counterexample-exclusion", || {
        e2e.unwrap_or(Status::Fail("end-to-end suite did not finish".into()))
    }));
    results.push(run("acas-size-direction", acas));
    println!("INFO  acas-shaped random networks (not a criterion):\n      {}", acas_shaped());

    let failed = results.iter().filter(|r| **r == Some(false)).count();
    let unavailable = results.iter().filter(|r| r.is_none()).count();
    println!(
        "acceptance: {} passed, {failed} failed, {unavailable} unavailable",
        results.iter().filter(|r| **r == Some(true)).count()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
