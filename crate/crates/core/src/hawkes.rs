//! Mutually-exciting Hawkes pair: the reciprocity kernel of the model.
//!
//! A directed pair `(i→j, j→i)` interacts with conditional intensities
//!
//! ```text
//! λ_ij(t) = μ_ij + η Σ_{u ∈ N_ji, u ≺ t} exp(-δ (t - u))
//! ```
//!
//! — each event in one direction raises the rate of the *opposite* direction
//! by `η`, decaying at rate `δ`. The process is stationary when `η < δ`.
//!
//! Event-time ties across directions are broken forward-before-backward: a
//! forward event at time `t` excites a backward event at the same timestamp
//! (relevant for second-resolution real data; simulated times are almost
//! surely distinct). Time queries ([`intensity_at`], [`compensator`]) use the
//! left limit — events at exactly `t` do not contribute.
//!
//! Log-likelihoods use the O(n) exponential-kernel recursion
//!
//! ```text
//! S^{(ℓ)} = e^{-δ Δt} S^{(ℓ-1)} + Σ_{opposite u in the gap} e^{-δ (t^{(ℓ)} - u)}
//! ```
//!
//! rather than the O(n²) double sum, and only ever exponentiate time
//! *differences*, so long horizons cannot overflow.

use crate::error::{require_non_negative, require_positive, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Reciprocity kernel parameters `(η, δ)`: jump size and decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub eta: f64,
    pub delta: f64,
}

impl KernelParams {
    pub fn new(eta: f64, delta: f64) -> Result<Self> {
        require_non_negative("eta", eta)?;
        require_positive("delta", delta)?;
        Ok(KernelParams { eta, delta })
    }

    /// Stationarity: each event begets `η/δ < 1` replies on average.
    pub fn is_stationary(&self) -> bool {
        self.eta < self.delta
    }

    /// Expected number of direct replies per event, `η/δ`.
    pub fn branching_ratio(&self) -> f64 {
        self.eta / self.delta
    }
}

/// Base rates of the two directions of one pair (`μ_ij`, `μ_ji`). The model
/// sets both to `Σ_k w_ik w_jk`, but inference and prediction treat them as
/// free inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRates {
    pub forward: f64,
    pub backward: f64,
}

impl PairRates {
    pub fn new(forward: f64, backward: f64) -> Result<Self> {
        require_non_negative("mu forward", forward)?;
        require_non_negative("mu backward", backward)?;
        Ok(PairRates { forward, backward })
    }

    pub fn symmetric(mu: f64) -> Result<Self> {
        Self::new(mu, mu)
    }

    pub fn total(&self) -> f64 {
        self.forward + self.backward
    }

    pub fn get(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Forward => self.forward,
            Direction::Backward => self.backward,
        }
    }
}

/// One direction of a pair. `Forward` sorts before `Backward` at equal
/// timestamps, which is exactly the tie rule above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn opposite(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Event times of one pair over `[0, horizon]`, split by direction.
///
/// Times are nondecreasing within a direction (equal timestamps are legal —
/// real datasets carry second-resolution stamps — and keep insertion order);
/// simulation produces strictly increasing times almost surely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHistory {
    forward: Vec<f64>,
    backward: Vec<f64>,
    horizon: f64,
}

impl PairHistory {
    pub fn new(forward: Vec<f64>, backward: Vec<f64>, horizon: f64) -> Result<Self> {
        require_positive("horizon", horizon)?;
        for (times, name) in [(&forward, "forward"), (&backward, "backward")] {
            for (idx, win) in times.windows(2).enumerate() {
                if !(win[0] <= win[1]) {
                    return Err(Error::UnsortedHistory { direction: name, index: idx + 1 });
                }
            }
            if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
                if !(first >= 0.0 && last <= horizon && first.is_finite() && last.is_finite()) {
                    return Err(Error::invalid(
                        "event time",
                        if first < 0.0 { first } else { last },
                        "must lie in [0, horizon]",
                    ));
                }
            }
        }
        Ok(PairHistory { forward, backward, horizon })
    }

    pub fn empty(horizon: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), horizon)
    }

    pub fn forward(&self) -> &[f64] {
        &self.forward
    }

    pub fn backward(&self) -> &[f64] {
        &self.backward
    }

    pub fn events(&self, dir: Direction) -> &[f64] {
        match dir {
            Direction::Forward => &self.forward,
            Direction::Backward => &self.backward,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn total_events(&self) -> usize {
        self.forward.len() + self.backward.len()
    }

    /// Merged `(time, direction)` sequence in the model's tie order.
    pub fn merged(&self) -> Vec<(f64, Direction)> {
        let mut out = Vec::with_capacity(self.total_events());
        let (mut f, mut b) = (0usize, 0usize);
        while f < self.forward.len() || b < self.backward.len() {
            let take_forward = match (self.forward.get(f), self.backward.get(b)) {
                (Some(&tf), Some(&tb)) => tf <= tb,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => unreachable!(),
            };
            if take_forward {
                out.push((self.forward[f], Direction::Forward));
                f += 1;
            } else {
                out.push((self.backward[b], Direction::Backward));
                b += 1;
            }
        }
        out
    }

    /// Restriction to `[0, t]`, with the horizon reset to `t`.
    pub fn truncate(&self, t: f64) -> Result<PairHistory> {
        let keep = |v: &[f64]| v.iter().copied().take_while(|&x| x <= t).collect();
        PairHistory::new(keep(&self.forward), keep(&self.backward), t)
    }

    /// Appends an event the caller guarantees to be in order and in range.
    pub(crate) fn push_unchecked(&mut self, t: f64, forward: bool) {
        if forward {
            self.forward.push(t);
        } else {
            self.backward.push(t);
        }
    }
}

/// Decayed excitation sums `(S_forward, S_backward)` at time `t` given all
/// events strictly before `t`: `S_forward = Σ_{u ∈ backward, u < t} e^{-δ(t-u)}`
/// and vice versa. These are the sufficient statistics for continuing a
/// simulation or prediction from `t`.
pub fn excitation_state(history: &PairHistory, kernel: &KernelParams, t: f64) -> (f64, f64) {
    let decayed = |events: &[f64]| {
        events
            .iter()
            .take_while(|&&u| u < t)
            .map(|&u| (-kernel.delta * (t - u)).exp())
            .sum::<f64>()
    };
    (decayed(&history.backward), decayed(&history.forward))
}

/// Conditional intensity of `direction` at time `t` (left limit: events at
/// exactly `t` do not contribute).
pub fn intensity_at(
    t: f64,
    direction: Direction,
    history: &PairHistory,
    rates: &PairRates,
    kernel: &KernelParams,
) -> f64 {
    let opposite = history.events(direction.opposite());
    let excitation: f64 = opposite
        .iter()
        .take_while(|&&u| u < t)
        .map(|&u| (-kernel.delta * (t - u)).exp())
        .sum();
    rates.get(direction) + kernel.eta * excitation
}

/// Integrated intensity `Λ(t) = ∫_0^t λ(s) ds` of `direction`:
/// `t·μ + (η/δ) Σ_{u < t} (1 - e^{-δ(t-u)})`.
pub fn compensator(
    t: f64,
    direction: Direction,
    history: &PairHistory,
    rates: &PairRates,
    kernel: &KernelParams,
) -> f64 {
    let opposite = history.events(direction.opposite());
    let sum: f64 = opposite
        .iter()
        .take_while(|&&u| u < t)
        .map(|&u| -(-kernel.delta * (t - u)).exp_m1())
        .sum();
    rates.get(direction) * t + kernel.eta / kernel.delta * sum
}

/// Per-direction log-likelihood terms `Σ_ℓ log λ(t^{(ℓ)}) - Λ(horizon)`,
/// computed in one O(n) pass over the merged history. Returns
/// `(forward_term, backward_term)`; a zero intensity at an event yields
/// `-∞` for that direction's term rather than an error.
pub fn directional_loglik_terms(
    history: &PairHistory,
    rates: &PairRates,
    kernel: &KernelParams,
) -> (f64, f64) {
    let mut log_f = 0.0;
    let mut log_b = 0.0;
    // Excitation sums at the current event, updated by pure decay between
    // events; a tie decays by e^0 = 1, which realizes forward-before-backward.
    let (mut s_f, mut s_b) = (0.0f64, 0.0f64);
    let mut t_prev = 0.0f64;
    for (t, dir) in history.merged() {
        let decay = (-kernel.delta * (t - t_prev)).exp();
        s_f *= decay;
        s_b *= decay;
        match dir {
            Direction::Forward => {
                log_f += (rates.forward + kernel.eta * s_f).ln();
                s_b += 1.0;
            }
            Direction::Backward => {
                log_b += (rates.backward + kernel.eta * s_b).ln();
                s_f += 1.0;
            }
        }
        t_prev = t;
    }
    let horizon = history.horizon();
    let comp = |events: &[f64], mu: f64| {
        let sum: f64 = events
            .iter()
            .take_while(|&&u| u < horizon)
            .map(|&u| -(-kernel.delta * (horizon - u)).exp_m1())
            .sum();
        mu * horizon + kernel.eta / kernel.delta * sum
    };
    (
        log_f - comp(&history.backward, rates.forward),
        log_b - comp(&history.forward, rates.backward),
    )
}

/// Joint log-likelihood of both directions of one pair over `[0, horizon]`.
pub fn loglik_pair(history: &PairHistory, rates: &PairRates, kernel: &KernelParams) -> f64 {
    let (f, b) = directional_loglik_terms(history, rates, kernel);
    f + b
}

/// Exact simulation of one pair on `[0, horizon]` by thinning. Between
/// events the total intensity decays monotonically, so its left value is a
/// valid dominating rate; before the first event the bound is tight and the
/// first arrival is exactly `Exponential(μ_ij + μ_ji)`.
pub fn simulate_pair<R: Rng + ?Sized>(
    rates: &PairRates,
    kernel: &KernelParams,
    horizon: f64,
    rng: &mut R,
) -> Result<PairHistory> {
    require_positive("horizon", horizon)?;
    if !kernel.is_stationary() {
        return Err(Error::NonStationary { eta: kernel.eta, delta: kernel.delta });
    }
    let mut history = PairHistory::empty(horizon)?;
    thinning_extend(&mut history, rates, kernel, 0.0, horizon, (0.0, 0.0), usize::MAX, rng);
    Ok(history)
}

/// Continues a pair past `from` until `until`, conditioning on `history`
/// (all events ≤ `from`). Returns only the new events, on horizon `until`.
/// Used by forward-simulation prediction; stationarity is required.
pub fn simulate_pair_from<R: Rng + ?Sized>(
    history: &PairHistory,
    from: f64,
    until: f64,
    rates: &PairRates,
    kernel: &KernelParams,
    rng: &mut R,
) -> Result<PairHistory> {
    if !kernel.is_stationary() {
        return Err(Error::NonStationary { eta: kernel.eta, delta: kernel.delta });
    }
    if !(until > from) {
        return Err(Error::invalid("until", until, "must exceed the start time"));
    }
    // State at `from`+: events at exactly `from` have already fired, so they
    // count with weight e^0 = 1.
    let decayed = |events: &[f64]| {
        events
            .iter()
            .take_while(|&&u| u <= from)
            .map(|&u| (-kernel.delta * (from - u)).exp())
            .sum::<f64>()
    };
    let state = (decayed(history.backward()), decayed(history.forward()));
    let mut future = PairHistory::empty(until)?;
    thinning_extend(&mut future, rates, kernel, from, until, state, usize::MAX, rng);
    Ok(future)
}

/// Core thinning loop. `state` carries the decayed excitation sums
/// `(S_forward, S_backward)` at `start`; new events are appended to `out`.
/// Returns `false` if `max_new` events were generated before reaching
/// `until` — the explosion guard for non-stationary kernels.
pub(crate) fn thinning_extend<R: Rng + ?Sized>(
    out: &mut PairHistory,
    rates: &PairRates,
    kernel: &KernelParams,
    start: f64,
    until: f64,
    state: (f64, f64),
    max_new: usize,
    rng: &mut R,
) -> bool {
    let (mut s_f, mut s_b) = state;
    let mut t = start;
    let mut produced = 0usize;
    loop {
        let bound = rates.total() + kernel.eta * (s_f + s_b);
        if bound <= 0.0 {
            return true; // nothing can ever fire
        }
        let gap = -rng.random::<f64>().ln() / bound;
        let cand = t + gap;
        if cand > until {
            return true;
        }
        let decay = (-kernel.delta * gap).exp();
        s_f *= decay;
        s_b *= decay;
        let lambda_f = rates.forward + kernel.eta * s_f;
        let lambda_b = rates.backward + kernel.eta * s_b;
        let u: f64 = rng.random::<f64>() * bound;
        if u < lambda_f {
            out.forward.push(cand);
            s_b += 1.0;
            produced += 1;
        } else if u < lambda_f + lambda_b {
            out.backward.push(cand);
            s_f += 1.0;
            produced += 1;
        }
        if produced >= max_new {
            return false;
        }
        t = cand;
    }
}

/// Expected number of events in one direction of a symmetric pair
/// (`μ_ij = μ_ji = mu`) over `[0, t]`:
///
/// ```text
/// E[N(t)] = μ ( δ/(δ-η) · t  -  η/(δ-η)² · (1 - e^{-t(δ-η)}) )
/// ```
///
/// Requires stationarity (`η < δ`).
pub fn expected_count(mu: f64, kernel: &KernelParams, t: f64) -> Result<f64> {
    require_non_negative("mu", mu)?;
    require_non_negative("t", t)?;
    if !kernel.is_stationary() {
        return Err(Error::NonStationary { eta: kernel.eta, delta: kernel.delta });
    }
    let gap = kernel.delta - kernel.eta;
    Ok(mu * (kernel.delta / gap * t + kernel.eta / (gap * gap) * (-t * gap).exp_m1()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn kernel(eta: f64, delta: f64) -> KernelParams {
        KernelParams::new(eta, delta).unwrap()
    }

    /// O(n²) reference: direct double sums straight from the definition,
    /// including the forward-before-backward tie rule.
    fn naive_loglik(history: &PairHistory, rates: &PairRates, k: &KernelParams) -> f64 {
        let horizon = history.horizon();
        let term = |own: &[f64], opp: &[f64], mu: f64, own_first_at_ties: bool| {
            let mut sum_log = 0.0;
            for &t in own {
                let exc: f64 = opp
                    .iter()
                    .filter(|&&u| if own_first_at_ties { u < t } else { u <= t })
                    .map(|&u| (-k.delta * (t - u)).exp())
                    .sum();
                sum_log += (mu + k.eta * exc).ln();
            }
            let comp: f64 = opp
                .iter()
                .filter(|&&u| u < horizon)
                .map(|&u| 1.0 - (-k.delta * (horizon - u)).exp())
                .sum();
            sum_log - mu * horizon - k.eta / k.delta * comp
        };
        term(history.forward(), history.backward(), rates.forward, true)
            + term(history.backward(), history.forward(), rates.backward, false)
    }

    fn random_history(n: usize, horizon: f64, seed: u64) -> PairHistory {
        let mut rng = stream(seed, Domain::Pairs, 99);
        let mut f: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon).collect();
        let mut b: Vec<f64> = (0..n / 2).map(|_| rng.random::<f64>() * horizon).collect();
        f.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        PairHistory::new(f, b, horizon).unwrap()
    }

    #[test]
    fn test_intensity_baseline_jump_and_left_limit() {
        let h = PairHistory::new(vec![], vec![2.0], 10.0).unwrap();
        let r = PairRates::new(0.5, 0.25).unwrap();
        let k = kernel(0.8, 2.0);
        // Before any event: baseline.
        assert_eq!(intensity_at(1.0, Direction::Forward, &h, &r, &k), 0.5);
        // At the event time: left limit, still baseline.
        assert_eq!(intensity_at(2.0, Direction::Forward, &h, &r, &k), 0.5);
        // Just after: jump of exactly η (up to the infinitesimal decay).
        let just_after = intensity_at(2.0 + 1e-12, Direction::Forward, &h, &r, &k);
        assert_relative_eq!(just_after, 0.5 + 0.8, max_relative = 1e-9);
        // The backward event does not excite the backward direction.
        assert_eq!(intensity_at(3.0, Direction::Backward, &h, &r, &k), 0.25);
    }

    #[test]
    fn test_compensator_single_event_closed_form() {
        let h = PairHistory::new(vec![], vec![1.0], 10.0).unwrap();
        let r = PairRates::symmetric(0.3).unwrap();
        let k = kernel(0.7, 1.5);
        assert_eq!(compensator(0.0, Direction::Forward, &h, &r, &k), 0.0);
        let t = 4.0;
        let expect = 0.3 * t + 0.7 / 1.5 * (1.0 - (-1.5f64 * 3.0).exp());
        assert_relative_eq!(
            compensator(t, Direction::Forward, &h, &r, &k),
            expect,
            max_relative = 1e-14
        );
        // Monotone in t.
        let mut prev = 0.0;
        for i in 1..=40 {
            let c = compensator(i as f64 * 0.25, Direction::Forward, &h, &r, &k);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn test_loglik_empty_history() {
        let h = PairHistory::empty(7.0).unwrap();
        let r = PairRates::new(0.4, 0.9).unwrap();
        let k = kernel(0.5, 2.0);
        assert_relative_eq!(loglik_pair(&h, &r, &k), -(0.4 + 0.9) * 7.0, max_relative = 1e-14);
    }

    #[test]
    fn test_loglik_matches_naive_on_random_histories() {
        let r = PairRates::new(0.7, 0.4).unwrap();
        let k = kernel(0.9, 1.7);
        for seed in 0..20 {
            let h = random_history(60, 50.0, seed);
            let fast = loglik_pair(&h, &r, &k);
            let slow = naive_loglik(&h, &r, &k);
            assert!(
                (fast - slow).abs() < 1e-10,
                "seed {seed}: fast {fast} vs naive {slow}"
            );
        }
    }

    #[test]
    fn test_loglik_tie_rule_forward_excites_backward_at_equal_time() {
        let r = PairRates::symmetric(0.5).unwrap();
        let k = kernel(1.0, 2.0);
        let h = PairHistory::new(vec![3.0], vec![3.0], 5.0).unwrap();
        // Backward event at t=3 sees the forward event at t=3 (weight 1);
        // the forward event sees nothing.
        let expect = 0.5f64.ln() + (0.5 + 1.0f64).ln()
            - (0.5 * 5.0 + 1.0 / 2.0 * (1.0 - (-2.0f64 * 2.0).exp()))
            - (0.5 * 5.0 + 1.0 / 2.0 * (1.0 - (-2.0f64 * 2.0).exp()));
        assert_relative_eq!(loglik_pair(&h, &r, &k), expect, max_relative = 1e-12);
        // And the naive reference agrees.
        assert_relative_eq!(naive_loglik(&h, &r, &k), expect, max_relative = 1e-12);
    }

    #[test]
    fn test_loglik_zero_rate_with_event_is_neg_infinity() {
        let h = PairHistory::new(vec![1.0], vec![], 5.0).unwrap();
        let r = PairRates::new(0.0, 1.0).unwrap();
        let k = kernel(0.5, 2.0);
        assert_eq!(loglik_pair(&h, &r, &k), f64::NEG_INFINITY);
    }

    #[test]
    fn test_simulate_pair_poisson_limit() {
        // η = 0 reduces to two independent Poisson processes.
        let r = PairRates::new(2.0, 1.0).unwrap();
        let k = kernel(0.0, 1.0);
        let mut rng = stream(5, Domain::Pairs, 0);
        let reps = 3000;
        let horizon = 4.0;
        let (mut nf, mut nb) = (0.0, 0.0);
        for _ in 0..reps {
            let h = simulate_pair(&r, &k, horizon, &mut rng).unwrap();
            nf += h.forward().len() as f64;
            nb += h.backward().len() as f64;
        }
        let n = reps as f64;
        for (total, mu) in [(nf, 2.0), (nb, 1.0)] {
            let mean = total / n;
            let se = (mu * horizon / n).sqrt();
            assert!(
                (mean - mu * horizon).abs() < 3.0 * se,
                "poisson count {mean} vs {}",
                mu * horizon
            );
        }
    }

    #[test]
    fn test_simulate_pair_rejects_nonstationary() {
        let r = PairRates::symmetric(1.0).unwrap();
        let mut rng = stream(5, Domain::Pairs, 1);
        assert!(simulate_pair(&r, &kernel(2.0, 2.0), 1.0, &mut rng).is_err());
        assert!(simulate_pair(&r, &kernel(3.0, 2.0), 1.0, &mut rng).is_err());
    }

    #[test]
    fn test_simulate_pair_is_deterministic_per_stream() {
        let r = PairRates::symmetric(0.8).unwrap();
        let k = kernel(0.9, 2.0);
        let a = simulate_pair(&r, &k, 20.0, &mut stream(42, Domain::Pairs, 7)).unwrap();
        let b = simulate_pair(&r, &k, 20.0, &mut stream(42, Domain::Pairs, 7)).unwrap();
        assert_eq!(a, b);
        // Strictly increasing within each direction (a.s.).
        for times in [a.forward(), a.backward()] {
            for w in times.windows(2) {
                assert!(w[0] < w[1]);
            }
        }
    }

    #[test]
    fn test_expected_count_frozen_value_and_poisson_limit() {
        // μ(δ/(δ-η)·t - η/(δ-η)²(1-e^{-t(δ-η)})) at μ=0.25, η=1, δ=2, t=10.
        let v = expected_count(0.25, &kernel(1.0, 2.0), 10.0).unwrap();
        assert_relative_eq!(v, 4.750_011_349_982_44, max_relative = 1e-12);
        // η = 0: plain Poisson mean.
        let p = expected_count(0.3, &kernel(0.0, 2.0), 7.0).unwrap();
        assert_relative_eq!(p, 2.1, max_relative = 1e-14);
        // t = 0: nothing yet.
        assert_eq!(expected_count(1.0, &kernel(1.0, 2.0), 0.0).unwrap(), 0.0);
        assert!(expected_count(1.0, &kernel(2.0, 2.0), 1.0).is_err());
    }

    #[test]
    fn test_expected_count_matches_simulation() {
        let mu = 0.5;
        let k = kernel(1.2, 2.0);
        let horizon = 8.0;
        let expect = expected_count(mu, &k, horizon).unwrap();
        let r = PairRates::symmetric(mu).unwrap();
        let mut rng = stream(21, Domain::Pairs, 3);
        let reps = 4000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..reps {
            let h = simulate_pair(&r, &k, horizon, &mut rng).unwrap();
            let c = h.forward().len() as f64;
            sum += c;
            sq += c * c;
        }
        let n = reps as f64;
        let mean = sum / n;
        let se = ((sq / n - mean * mean) / n).sqrt();
        assert!(
            (mean - expect).abs() < 3.0 * se,
            "count {mean} vs {expect} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn test_simulate_pair_from_continues_the_excitation() {
        // A huge train of forward events right before the split must raise
        // the backward rate in the continuation.
        let k = kernel(1.5, 2.0);
        let r = PairRates::symmetric(0.05).unwrap();
        let train = PairHistory::new((0..30).map(|i| 9.0 + 0.03 * i as f64).collect(), vec![], 10.0)
            .unwrap();
        let mut rng = stream(33, Domain::Predict, 0);
        let reps = 800;
        let mut excited = 0.0;
        let mut cold = 0.0;
        for i in 0..reps {
            let fut = simulate_pair_from(&train, 10.0, 12.0, &r, &k, &mut rng).unwrap();
            excited += fut.backward().len() as f64;
            let mut rng2 = stream(34, Domain::Predict, i);
            let base = simulate_pair(&r, &k, 2.0, &mut rng2).unwrap();
            cold += base.backward().len() as f64;
        }
        assert!(
            excited / reps as f64 > 4.0 * (cold / reps as f64 + 0.01),
            "training excitation must carry over: excited {excited}, cold {cold}"
        );
    }

    #[test]
    fn test_history_validation() {
        assert!(PairHistory::new(vec![2.0, 1.0], vec![], 5.0).is_err());
        assert!(PairHistory::new(vec![1.0, 1.0], vec![], 5.0).is_ok()); // ties kept
        assert!(PairHistory::new(vec![6.0], vec![], 5.0).is_err());
        assert!(PairHistory::new(vec![-0.1], vec![], 5.0).is_err());
        assert!(KernelParams::new(-0.1, 1.0).is_err());
        assert!(KernelParams::new(0.5, 0.0).is_err());
        assert!(PairRates::new(-0.5, 1.0).is_err());
    }

    #[test]
    fn test_truncate_resets_horizon_and_drops_late_events() {
        let h = PairHistory::new(vec![1.0, 3.0, 4.5], vec![2.0, 4.9], 5.0).unwrap();
        let t = h.truncate(3.5).unwrap();
        assert_eq!(t.forward(), &[1.0, 3.0]);
        assert_eq!(t.backward(), &[2.0]);
        assert_eq!(t.horizon(), 3.5);
    }
}
