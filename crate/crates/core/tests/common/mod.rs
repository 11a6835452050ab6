//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use hawkes_ccrm::hawkes::Direction;
use hawkes_ccrm::{KernelParams, PairHistory, PairRates};
use rand::Rng;

/// O(n²) pair log-likelihood: every event's excitation is summed directly
/// over all earlier opposite-direction events in merged order (so tied
/// timestamps keep the forward-before-backward precedence), and each
/// direction's compensator uses the per-event exponential integrals. This is
/// the textbook evaluation the O(n) decay recursion must reproduce.
pub fn naive_pair_loglik(
    history: &PairHistory,
    rates: &PairRates,
    kernel: &KernelParams,
) -> f64 {
    let merged = history.merged();
    let horizon = history.horizon();
    let (mut log_f, mut log_b) = (0.0f64, 0.0f64);
    for (l, &(t, dir)) in merged.iter().enumerate() {
        let mut s = 0.0;
        for &(u, d) in &merged[..l] {
            if d == dir.opposite() {
                s += (-kernel.delta * (t - u)).exp();
            }
        }
        let term = (rates.get(dir) + kernel.eta * s).ln();
        match dir {
            Direction::Forward => log_f += term,
            Direction::Backward => log_b += term,
        }
    }
    let comp = |exciting: &[f64], mu: f64| -> f64 {
        let sum: f64 = exciting
            .iter()
            .filter(|&&u| u < horizon)
            .map(|&u| 1.0 - (-kernel.delta * (horizon - u)).exp())
            .sum();
        mu * horizon + kernel.eta / kernel.delta * sum
    };
    (log_f - comp(history.backward(), rates.forward))
        + (log_b - comp(history.forward(), rates.backward))
}

/// A random two-direction history: sorted uniform times, random directions,
/// and occasional exact timestamp ties to exercise the tie-order rule.
pub fn random_history<R: Rng + ?Sized>(rng: &mut R, n: usize, horizon: f64) -> PairHistory {
    let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon * 0.98).collect();
    times.sort_by(f64::total_cmp);
    for i in 1..times.len() {
        if rng.random::<f64>() < 0.05 {
            times[i] = times[i - 1];
        }
    }
    let mut forward = Vec::new();
    let mut backward = Vec::new();
    for t in times {
        if rng.random::<bool>() {
            forward.push(t);
        } else {
            backward.push(t);
        }
    }
    PairHistory::new(forward, backward, horizon).unwrap()
}

/// Sample mean and standard error of the mean.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
