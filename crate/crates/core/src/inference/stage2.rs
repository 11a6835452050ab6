//! Posterior sampling for the reciprocity kernel (η, δ) from event times,
//! conditional on fixed per-pair base rates.
//!
//! Each directed side of a pair is a counting process with intensity
//!
//! ```text
//! λ(t) = μ + η Σ_{opposite events u < t} exp(-δ (t - u))
//! ```
//!
//! and only directions that carry at least one event enter the likelihood:
//! the base rates come from a stage that has already conditioned on which
//! pairs interact, so the "no event" information is spent. Per included
//! direction the contribution is
//!
//! ```text
//! Σ_i log λ(t_i) - T μ - (η/δ) Σ_{opposite u} (1 - exp(-δ (T - u)))
//! ```
//!
//! For fixed δ both the per-event excitation sums and the compensator sums
//! are independent of η, so they are cached once per δ: η moves cost a few
//! multiplies per event, while δ moves rebuild the cache (in parallel across
//! pairs). The sampler is an alternating random-walk Metropolis on the
//! positive half-line with Exponential priors; η ≥ δ (a non-stationary
//! kernel) is not excluded — the likelihood over a fixed horizon is finite
//! there, and the posterior mass on that region is reported as a diagnostic.

use crate::dataset::InteractionDataset;
use crate::error::{require_positive, Error, Result};
use crate::exec;
use crate::inference::stage1::MU_FLOOR;
use crate::inference::{
    credible_interval, mean, potential_scale_reduction, propose_positive, AdaptiveStep,
};
use crate::hawkes::{Direction, KernelParams, PairHistory, PairRates};
use crate::rng::{stream, Domain};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Tuning knobs for the kernel-stage sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Config {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub chains: usize,
    /// Initial random-walk proposal scales for η and δ, adapted toward 44%
    /// acceptance over the first half of burn-in and then frozen. Read as
    /// variances by default; flip `proposal_is_sd` to pass standard
    /// deviations.
    pub proposal_eta: f64,
    pub proposal_delta: f64,
    pub proposal_is_sd: bool,
    /// Rate of the Exponential priors on η and δ.
    pub prior_rate: f64,
    /// Chain starting point, jittered multiplicatively per chain.
    pub init_eta: f64,
    pub init_delta: f64,
}

impl Stage2Config {
    pub fn new(iterations: usize) -> Result<Self> {
        if iterations == 0 {
            return Err(Error::invalid("iterations", 0.0, "at least one sweep required"));
        }
        Ok(Stage2Config {
            iterations,
            burn_in: iterations / 2,
            thinning: 1,
            chains: 2,
            proposal_eta: 1.5,
            proposal_delta: 2.5,
            proposal_is_sd: false,
            prior_rate: 0.01,
            init_eta: 1.0,
            init_delta: 1.0,
        })
    }

    pub fn sd_eta(&self) -> f64 {
        if self.proposal_is_sd {
            self.proposal_eta
        } else {
            self.proposal_eta.sqrt()
        }
    }

    pub fn sd_delta(&self) -> f64 {
        if self.proposal_is_sd {
            self.proposal_delta
        } else {
            self.proposal_delta.sqrt()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::invalid("iterations", 0.0, "at least one sweep required"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid(
                "burn_in",
                self.burn_in as f64,
                "must be smaller than iterations",
            ));
        }
        if self.thinning == 0 {
            return Err(Error::invalid("thinning", 0.0, "must be >= 1"));
        }
        if self.chains == 0 {
            return Err(Error::invalid("chains", 0.0, "at least one chain required"));
        }
        crate::error::require_non_negative("proposal_eta", self.proposal_eta)?;
        crate::error::require_non_negative("proposal_delta", self.proposal_delta)?;
        require_positive("prior_rate", self.prior_rate)?;
        require_positive("init_eta", self.init_eta)?;
        require_positive("init_delta", self.init_delta)?;
        Ok(())
    }
}

/// One pair's event history together with its (fixed) base rates.
#[derive(Debug, Clone)]
pub struct PairSeries {
    pub rates: PairRates,
    pub history: PairHistory,
}

/// Everything the kernel stage conditions on.
#[derive(Debug, Clone)]
pub struct Stage2Data {
    pub pairs: Vec<PairSeries>,
    pub horizon: f64,
}

impl Stage2Data {
    pub fn new(pairs: Vec<PairSeries>, horizon: f64) -> Result<Self> {
        require_positive("horizon", horizon)?;
        for pair in &pairs {
            if pair.history.horizon() != horizon {
                return Err(Error::invalid(
                    "horizon",
                    pair.history.horizon(),
                    "pair history horizon differs from the dataset horizon",
                ));
            }
        }
        Ok(Stage2Data { pairs, horizon })
    }

    /// Builds the stage input from a dataset and a base-rate map
    /// `(i, j) ↦ μ` over unordered pairs `i < j` (forward meaning `i → j`).
    /// Only event-bearing pairs are retained, and rates are floored at
    /// [`MU_FLOOR`] so observed events never meet a zero base rate.
    pub fn from_dataset<F>(dataset: &InteractionDataset, mu: F) -> Result<Self>
    where
        F: Fn(u32, u32) -> PairRates,
    {
        let mut pairs = Vec::new();
        for ((i, j), history) in dataset.pair_histories() {
            let raw = mu(i, j);
            let rates = PairRates::new(raw.forward.max(MU_FLOOR), raw.backward.max(MU_FLOOR))?;
            pairs.push(PairSeries { rates, history });
        }
        Stage2Data::new(pairs, dataset.horizon())
    }

    pub fn n_events(&self) -> usize {
        self.pairs.iter().map(|p| p.history.total_events()).sum()
    }
}

/// Per-pair quantities that depend on δ but not on η or μ: the excitation
/// sum at each event and the compensator kernel sums per direction.
struct PairCache {
    mu_f: f64,
    mu_b: f64,
    fwd_exc: Vec<f64>,
    bwd_exc: Vec<f64>,
    g_fwd: f64,
    g_bwd: f64,
}

fn build_pair_cache(pair: &PairSeries, delta: f64, horizon: f64) -> PairCache {
    let mut fwd_exc = Vec::with_capacity(pair.history.forward().len());
    let mut bwd_exc = Vec::with_capacity(pair.history.backward().len());
    // Same decay recursion and tie order as the direct likelihood walk.
    let (mut s_f, mut s_b) = (0.0f64, 0.0f64);
    let mut t_prev = 0.0f64;
    for (t, dir) in pair.history.merged() {
        let decay = (-delta * (t - t_prev)).exp();
        s_f *= decay;
        s_b *= decay;
        match dir {
            Direction::Forward => {
                fwd_exc.push(s_f);
                s_b += 1.0;
            }
            Direction::Backward => {
                bwd_exc.push(s_b);
                s_f += 1.0;
            }
        }
        t_prev = t;
    }
    let g = |events: &[f64]| -> f64 {
        events
            .iter()
            .map(|&u| -(-delta * (horizon - u)).exp_m1())
            .sum()
    };
    PairCache {
        mu_f: pair.rates.forward,
        mu_b: pair.rates.backward,
        g_fwd: g(pair.history.backward()),
        g_bwd: g(pair.history.forward()),
        fwd_exc,
        bwd_exc,
    }
}

fn build_caches(pairs: &[PairSeries], delta: f64, horizon: f64) -> Vec<PairCache> {
    exec::map_slice(pairs, |pair| build_pair_cache(pair, delta, horizon))
}

/// Total log-likelihood at (η, δ) from prebuilt δ-caches. `mu_override`
/// replaces every pair's base rates by one shared value (the global-kernel
/// baseline). A direction without events still pays its compensator: on a
/// one-sided pair the silent side was exposed to the opposite events'
/// excitation, and that unanswered exposure is direct evidence about η.
fn cached_loglik(
    caches: &[PairCache],
    eta: f64,
    delta: f64,
    horizon: f64,
    mu_override: Option<f64>,
) -> f64 {
    exec::sum_by(caches, |cache| {
        let (mu_f, mu_b) = match mu_override {
            Some(m) => (m, m),
            None => (cache.mu_f, cache.mu_b),
        };
        let mut lp = 0.0;
        for &s in &cache.fwd_exc {
            lp += (mu_f + eta * s).ln();
        }
        lp -= horizon * mu_f + eta / delta * cache.g_fwd;
        for &s in &cache.bwd_exc {
            lp += (mu_b + eta * s).ln();
        }
        lp -= horizon * mu_b + eta / delta * cache.g_bwd;
        lp
    })
}

/// Log-posterior density of a kernel under the stage's likelihood and
/// independent Exponential(`prior_rate`) priors on η and δ, up to the
/// marginal-likelihood constant. Builds a fresh cache; the sampler itself
/// reuses caches across η moves.
pub fn stage2_logpost(kernel: &KernelParams, data: &Stage2Data, prior_rate: f64) -> Result<f64> {
    require_positive("prior_rate", prior_rate)?;
    let caches = build_caches(&data.pairs, kernel.delta, data.horizon);
    Ok(cached_loglik(&caches, kernel.eta, kernel.delta, data.horizon, None)
        + 2.0 * prior_rate.ln()
        - prior_rate * (kernel.eta + kernel.delta))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Chain {
    /// Post-burn-in, thinned (η, δ) draws.
    pub samples: Vec<(f64, f64)>,
    /// Log-posterior at every sweep.
    pub logpost: Vec<f64>,
    pub accept_eta: f64,
    pub accept_delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage2Samples {
    pub chains: Vec<Stage2Chain>,
}

impl Stage2Samples {
    pub fn pooled_eta(&self) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.samples.iter().map(|s| s.0))
            .collect()
    }

    pub fn pooled_delta(&self) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.samples.iter().map(|s| s.1))
            .collect()
    }

    pub fn posterior_mean(&self) -> (f64, f64) {
        (mean(&self.pooled_eta()), mean(&self.pooled_delta()))
    }

    /// Central credible intervals for η and δ at the given level.
    pub fn credible_intervals(&self, level: f64) -> Result<((f64, f64), (f64, f64))> {
        Ok((
            credible_interval(&self.pooled_eta(), level)?,
            credible_interval(&self.pooled_delta(), level)?,
        ))
    }

    /// Posterior mass on η ≥ δ, where reciprocation does not die out on its
    /// own — a warning sign for extrapolating beyond the observation window.
    pub fn nonstationary_fraction(&self) -> f64 {
        let mut total = 0usize;
        let mut hits = 0usize;
        for chain in &self.chains {
            for &(eta, delta) in &chain.samples {
                total += 1;
                hits += (eta >= delta) as usize;
            }
        }
        if total == 0 {
            0.0
        } else {
            hits as f64 / total as f64
        }
    }

    /// Split potential scale reduction of the η and δ traces.
    pub fn psrf(&self) -> Result<(f64, f64)> {
        let etas: Vec<Vec<f64>> = self
            .chains
            .iter()
            .map(|c| c.samples.iter().map(|s| s.0).collect())
            .collect();
        let deltas: Vec<Vec<f64>> = self
            .chains
            .iter()
            .map(|c| c.samples.iter().map(|s| s.1).collect())
            .collect();
        Ok((
            potential_scale_reduction(&etas)?,
            potential_scale_reduction(&deltas)?,
        ))
    }
}

/// Runs the kernel-stage sampler: alternating η / δ random-walk Metropolis,
/// `cfg.chains` independent chains in parallel on derived random streams.
pub fn run_stage2(data: &Stage2Data, cfg: &Stage2Config, seed: u64) -> Result<Stage2Samples> {
    cfg.validate()?;
    if data.pairs.is_empty() {
        return Err(Error::EmptyInput("no event-bearing pairs"));
    }
    let chains: Vec<Stage2Chain> = exec::map_indexed(cfg.chains, |c| {
        let mut rng = stream(seed, Domain::Stage2Chains, c as u64);
        run_chain(data, cfg, &mut rng)
    });
    Ok(Stage2Samples { chains })
}

fn run_chain<R: Rng + ?Sized>(data: &Stage2Data, cfg: &Stage2Config, rng: &mut R) -> Stage2Chain {
    let jitter = |rng: &mut R| (0.5 * rng.sample::<f64, _>(StandardNormal)).exp();
    let mut eta = cfg.init_eta * jitter(rng);
    let mut delta = cfg.init_delta * jitter(rng);
    let mut sd_eta = AdaptiveStep::new(cfg.sd_eta(), 0.44);
    let mut sd_delta = AdaptiveStep::new(cfg.sd_delta(), 0.44);
    let adapt_until = cfg.burn_in / 2;

    let mut caches = build_caches(&data.pairs, delta, data.horizon);
    let mut ll = cached_loglik(&caches, eta, delta, data.horizon, None);

    let mut samples = Vec::new();
    let mut logpost = Vec::with_capacity(cfg.iterations);
    let (mut acc_eta, mut acc_delta) = (0usize, 0usize);

    for it in 0..cfg.iterations {
        let (eta_new, correction) = propose_positive(eta, sd_eta.step(), rng);
        let ll_new = cached_loglik(&caches, eta_new, delta, data.horizon, None);
        let log_alpha = ll_new - ll - cfg.prior_rate * (eta_new - eta) + correction;
        let prob = log_alpha.exp().min(1.0);
        if rng.random::<f64>() < prob {
            eta = eta_new;
            ll = ll_new;
            acc_eta += 1;
        }
        if it < adapt_until {
            sd_eta.adapt(if prob.is_nan() { 0.0 } else { prob });
        }

        let (delta_new, correction) = propose_positive(delta, sd_delta.step(), rng);
        let caches_new = build_caches(&data.pairs, delta_new, data.horizon);
        let ll_new = cached_loglik(&caches_new, eta, delta_new, data.horizon, None);
        let log_alpha = ll_new - ll - cfg.prior_rate * (delta_new - delta) + correction;
        let prob = log_alpha.exp().min(1.0);
        if rng.random::<f64>() < prob {
            delta = delta_new;
            caches = caches_new;
            ll = ll_new;
            acc_delta += 1;
        }
        if it < adapt_until {
            sd_delta.adapt(if prob.is_nan() { 0.0 } else { prob });
        }

        logpost.push(ll + 2.0 * cfg.prior_rate.ln() - cfg.prior_rate * (eta + delta));
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0 {
            samples.push((eta, delta));
        }
    }

    let n = cfg.iterations as f64;
    Stage2Chain {
        samples,
        logpost,
        accept_eta: acc_eta as f64 / n,
        accept_delta: acc_delta as f64 / n,
    }
}

/// Point fit of the shared-rate reciprocating baseline: one μ for every
/// pair, same kernel likelihood.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlobalHawkesFit {
    pub mu: f64,
    pub eta: f64,
    pub delta: f64,
    pub nonstationary_fraction: f64,
    /// Pooled post-burn-in (μ, η, δ) draws.
    pub samples: Vec<(f64, f64, f64)>,
}

/// Fits the global baseline by a three-coordinate random-walk Metropolis
/// with Exponential(`cfg.prior_rate`) priors on μ, η, δ. The per-pair base
/// rates in `data` are ignored; proposal scales adapt toward 44% acceptance
/// during the first half of burn-in.
pub fn run_global_hawkes(
    data: &Stage2Data,
    cfg: &Stage2Config,
    seed: u64,
) -> Result<GlobalHawkesFit> {
    cfg.validate()?;
    if data.pairs.is_empty() {
        return Err(Error::EmptyInput("no event-bearing pairs"));
    }
    let events = data.n_events() as f64;
    let mu_init = (events / (2.0 * data.pairs.len() as f64 * data.horizon)).max(MU_FLOOR);

    let chains: Vec<Vec<(f64, f64, f64)>> = exec::map_indexed(cfg.chains, |c| {
        let mut rng = stream(seed, Domain::Stage2Chains, c as u64);
        run_global_chain(data, cfg, mu_init, &mut rng)
    });
    let samples: Vec<(f64, f64, f64)> = chains.into_iter().flatten().collect();
    let n = samples.len() as f64;
    let mu = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let eta = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let delta = samples.iter().map(|s| s.2).sum::<f64>() / n;
    let nonstationary =
        samples.iter().filter(|s| s.1 >= s.2).count() as f64 / n;
    Ok(GlobalHawkesFit {
        mu,
        eta,
        delta,
        nonstationary_fraction: nonstationary,
        samples,
    })
}

fn run_global_chain<R: Rng + ?Sized>(
    data: &Stage2Data,
    cfg: &Stage2Config,
    mu_init: f64,
    rng: &mut R,
) -> Vec<(f64, f64, f64)> {
    let jitter = |rng: &mut R| (0.5 * rng.sample::<f64, _>(StandardNormal)).exp();
    let mut mu = mu_init * jitter(rng);
    let mut eta = cfg.init_eta * jitter(rng);
    let mut delta = cfg.init_delta * jitter(rng);

    let mut sd_mu = AdaptiveStep::new(0.5 * mu_init, 0.44);
    let mut sd_eta = AdaptiveStep::new(0.5, 0.44);
    let mut sd_delta = AdaptiveStep::new(0.5, 0.44);
    let adapt_until = cfg.burn_in / 2;

    let mut caches = build_caches(&data.pairs, delta, data.horizon);
    let mut ll = cached_loglik(&caches, eta, delta, data.horizon, Some(mu));
    let mut samples = Vec::new();

    for it in 0..cfg.iterations {
        // μ move: caches carry no μ dependence, so this is cache-free.
        let (mu_new, correction) = propose_positive(mu, sd_mu.step(), rng);
        let ll_new = cached_loglik(&caches, eta, delta, data.horizon, Some(mu_new));
        let log_alpha = ll_new - ll - cfg.prior_rate * (mu_new - mu) + correction;
        let prob = log_alpha.exp().min(1.0);
        if rng.random::<f64>() < prob {
            mu = mu_new;
            ll = ll_new;
        }
        if it < adapt_until {
            sd_mu.adapt(if prob.is_nan() { 0.0 } else { prob });
        }

        let (eta_new, correction) = propose_positive(eta, sd_eta.step(), rng);
        let ll_new = cached_loglik(&caches, eta_new, delta, data.horizon, Some(mu));
        let log_alpha = ll_new - ll - cfg.prior_rate * (eta_new - eta) + correction;
        let prob = log_alpha.exp().min(1.0);
        if rng.random::<f64>() < prob {
            eta = eta_new;
            ll = ll_new;
        }
        if it < adapt_until {
            sd_eta.adapt(if prob.is_nan() { 0.0 } else { prob });
        }

        let (delta_new, correction) = propose_positive(delta, sd_delta.step(), rng);
        let caches_new = build_caches(&data.pairs, delta_new, data.horizon);
        let ll_new = cached_loglik(&caches_new, eta, delta_new, data.horizon, Some(mu));
        let log_alpha = ll_new - ll - cfg.prior_rate * (delta_new - delta) + correction;
        let prob = log_alpha.exp().min(1.0);
        if rng.random::<f64>() < prob {
            delta = delta_new;
            caches = caches_new;
            ll = ll_new;
        }
        if it < adapt_until {
            sd_delta.adapt(if prob.is_nan() { 0.0 } else { prob });
        }

        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0 {
            samples.push((mu, eta, delta));
        }
    }
    samples
}
