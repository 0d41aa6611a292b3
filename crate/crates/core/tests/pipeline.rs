use nncegar::generators::{network_with_widths, random_problem};
use nncegar::model::argmax;
use nncegar::{encode_robustness, parse_nnet, solve, write_nnet, CegarConfig, Network, Outcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Robust iff no grid point in the box changes the predicted class.
fn grid_robust(net: &Network, x0: &[f64], delta: f64, target: usize, step: f64) -> bool {
    let n = (2.0 * delta / step).round() as usize;
    for i in 0..=n {
        for j in 0..=n {
            let x = [x0[0] - delta + i as f64 * step, x0[1] - delta + j as f64 * step];
            let y = net.evaluate(&x).unwrap();
            if (0..y.len()).any(|a| a != target && y[a] > y[target]) {
                return false;
            }
        }
    }
    true
}

#[test]
fn robustness_agrees_with_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let config = CegarConfig::default();
    let mut seen = [0; 2];
    for _ in 0..12 {
        let net = network_with_widths(&mut rng, 2, &[6, 6], 3);
        let x0 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let target = argmax(&net.evaluate(&x0).unwrap()).unwrap();
        let problems = encode_robustness(&net, &x0, 0.1, target).unwrap();
        assert_eq!(problems.len(), 2);
        let verdicts: Vec<Outcome> = problems.iter().map(|(_, p)| solve(p, &config).unwrap().outcome).collect();
        assert!(verdicts.iter().all(Outcome::is_definite));
        let robust = verdicts.iter().all(|v| *v == Outcome::Holds);
        // A verified-robust query must survive the grid; a violated one must
        // carry a genuine class flip (the grid may miss thin regions).
        if robust {
            assert!(grid_robust(&net, &x0, 0.1, target, 1e-3));
        }
        for ((a, _), v) in problems.iter().zip(&verdicts) {
            if let Outcome::Violated { counterexample } = v {
                let y = net.evaluate(counterexample).unwrap();
                assert!(y[*a] > y[target]);
                assert!(counterexample.iter().zip(&x0).all(|(x, c)| (x - c).abs() <= 0.1 + 1e-12));
            }
        }
        seen[robust as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0, "{seen:?}");
}

#[test]
fn ten_classes_give_nine_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let net = network_with_widths(&mut rng, 3, &[5], 10);
    let x0 = [0.1, 0.2, 0.3];
    let target = argmax(&net.evaluate(&x0).unwrap()).unwrap();
    let problems = encode_robustness(&net, &x0, 0.05, target).unwrap();
    assert_eq!(problems.len(), 9);
    assert!(problems.iter().all(|(a, p)| *a != target && p.network.output_dim() == 1));
}

#[test]
fn zero_radius_holds_iff_margin_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..20 {
        let net = network_with_widths(&mut rng, 2, &[4], 3);
        let x0 = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let y = net.evaluate(&x0).unwrap();
        let target = argmax(&y).unwrap();
        let margin_positive = (0..3).all(|a| a == target || y[a] < y[target]);
        let all_hold = encode_robustness(&net, &x0, 0.0, target)
            .unwrap()
            .iter()
            .all(|(_, p)| solve(p, &CegarConfig::default()).unwrap().outcome == Outcome::Holds);
        assert_eq!(all_hold, margin_positive);
    }
}

#[test]
fn verdict_survives_nnet_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..30 {
        let p = random_problem(&mut rng, 2, 3, 5);
        let reloaded = parse_nnet(&write_nnet(&p.network), "mem").unwrap();
        assert_eq!(write_nnet(&reloaded), write_nnet(&p.network));
        let q = p.with_network(reloaded);
        let a = solve(&p, &CegarConfig::default()).unwrap();
        let b = solve(&q, &CegarConfig::default()).unwrap();
        assert_eq!(a.outcome, b.outcome);
    }
}
