//! Seeded generators for random networks, boxes and problems.
//!
//! Used by the randomized test suites and the benchmark fixtures.

use rand::Rng;

use crate::model::{Network, VerificationProblem};

/// A single-output network with 1..=`max_hidden` ReLU layers of 1..=`max_width`
/// neurons each. Weights are uniform in [-1, 1], biases in [-0.5, 0.5].
pub fn random_network<R: Rng>(rng: &mut R, input_dim: usize, max_hidden: usize, max_width: usize) -> Network {
    let depth = rng.gen_range(1..=max_hidden);
    let widths: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=max_width)).collect();
    network_with_widths(rng, input_dim, &widths, 1)
}

/// Dense network with the given hidden widths and `outputs` outputs.
pub fn network_with_widths<R: Rng>(rng: &mut R, input_dim: usize, widths: &[usize], outputs: usize) -> Network {
    let mut params = Vec::with_capacity(widths.len() + 1);
    let mut prev = input_dim;
    for &w in widths.iter().chain(std::iter::once(&outputs)) {
        let weights = (0..w)
            .map(|_| (0..prev).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let biases = (0..w).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        params.push((weights, biases));
        prev = w;
    }
    Network::from_parameters(input_dim, params).expect("generated shapes are consistent")
}

/// `count` points drawn uniformly from the box.
pub fn sample_box<R: Rng>(rng: &mut R, input_box: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            input_box
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect()
}

/// Random box inside [-1, 1]^n with side lengths in [0.1, 1].
pub fn random_box<R: Rng>(rng: &mut R, dim: usize) -> Vec<(f64, f64)> {
    (0..dim)
        .map(|_| {
            let width = rng.gen_range(0.1..=1.0);
            let lo = rng.gen_range(-1.0..=1.0 - width);
            (lo, lo + width)
        })
        .collect()
}

/// A random problem whose threshold sits between the sampled minimum and a
/// little above the sampled maximum, so both verdicts occur.
pub fn random_problem<R: Rng>(rng: &mut R, input_dim: usize, max_hidden: usize, max_width: usize) -> VerificationProblem {
    let network = random_network(rng, input_dim, max_hidden, max_width);
    let input_box = random_box(rng, input_dim);
    let ys: Vec<f64> = sample_box(rng, &input_box, 64)
        .iter()
        .map(|x| network.evaluate_scalar(x).expect("dimension matches"))
        .collect();
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-3);
    let threshold = rng.gen_range(hi - 0.3 * span..=hi + 0.3 * span);
    VerificationProblem::new(network, input_box, vec![], threshold).expect("generated problem is valid")
}
