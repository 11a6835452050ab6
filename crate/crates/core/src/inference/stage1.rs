//! Posterior sampling for node weights and measure hyperparameters from a
//! binary undirected graph.
//!
//! The graph likelihood treats each observed edge as "at least one event in
//! either direction over `[0, T]`" under pairwise Poisson base rates
//! `μ_ij = Σ_k w_ik w_jk`:
//!
//! ```text
//! P(z_ij = 1 | w) = 1 - exp(-2 T μ_ij)
//! ```
//!
//! Edges are augmented with latent per-community counts
//! `ñ_ijk ~ Poisson(2 T w_ik w_jk)` conditioned on `Σ_k ñ_ijk ≥ 1`, which
//! makes the conditional weight target log-concave in log coordinates
//! `u_i = log w_i0`, `v_ik = log β_ik`:
//!
//! ```text
//! log π(u, v | ñ, ...) = Σ_i [-σ u_i - τ exp(u_i)]
//!                      + Σ_ik [a_k v_ik - b_k exp(v_ik)]
//!                      + Σ_ik m_ik (u_i + v_ik)
//!                      - T Σ_k [(S_k + w_*k)² - Q_k] + const
//! ```
//!
//! with `w_ik = exp(u_i + v_ik)`, `m_ik = Σ_j ñ_ijk`, `S_k = Σ_i w_ik`,
//! `Q_k = Σ_i w_ik²`, and `w_*k` the β-weighted mass of atoms that produced
//! no edges. One sweep resamples the latent counts (exactly), the weights
//! (Hamiltonian move), and the hyperparameters jointly with a fresh remainder
//! mass (random-walk move on log-transformed coordinates whose remainder
//! proposal is drawn from its conditional prior, so that intractable density
//! cancels from the acceptance ratio).
//!
//! Posterior samples are reduced to a point estimate by averaging after
//! aligning community columns to a reference snapshot (minimum squared
//! distance over column permutations), since community labels are only
//! identified up to permutation.

use crate::dataset::BinaryGraph;
use crate::error::{require_positive, Error, Result};
use crate::exec;
use crate::inference::{
    hmc_update, multinomial_split, potential_scale_reduction, zero_truncated_poisson, AdaptiveStep,
};
use crate::measures::{CcrmHyper, GgpAtomSampler, GgpHyper, TotalMass, DEFAULT_TRUNCATION};
use crate::rng::{stream, Domain};
use itertools::Itertools;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

/// Smallest base rate handed to the event-time stage; keeps pairs that the
/// graph stage drove to numerically-zero rates from producing `-∞`
/// log-likelihoods for their observed events.
pub const MU_FLOOR: f64 = 1e-10;

/// Tuning knobs for the graph-stage sampler.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Config {
    /// Number of latent communities fitted.
    pub p: usize,
    /// Total sweeps per chain (latent counts + weights + hyperparameters).
    pub iterations: usize,
    /// Sweeps discarded from the front of each chain.
    pub burn_in: usize,
    /// Keep every `thinning`-th post-burn-in sweep.
    pub thinning: usize,
    pub chains: usize,
    /// Leapfrog steps per Hamiltonian weight update.
    pub leapfrog: usize,
    pub initial_hmc_step: f64,
    pub initial_hyper_sd: f64,
    /// Acceptance rate targeted by step-size adaptation for the weight move.
    pub hmc_target: f64,
    /// Acceptance rate targeted for the hyperparameter random walk.
    pub hyper_target: f64,
    /// Jump-size truncation level of the remainder-mass refresh.
    pub truncation: f64,
    /// Shape and rate of the Gamma priors placed on α, 1-σ, τ, a_k, b_k.
    pub prior_shape: f64,
    pub prior_rate: f64,
    /// Hyperparameter proposals whose expected remainder atom count exceeds
    /// this cap are rejected outright instead of sampled.
    pub max_remainder_atoms: f64,
}

impl Stage1Config {
    pub fn new(p: usize, iterations: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("p", 0.0, "at least one community required"));
        }
        if iterations == 0 {
            return Err(Error::invalid("iterations", 0.0, "at least one sweep required"));
        }
        Ok(Stage1Config {
            p,
            iterations,
            burn_in: iterations / 2,
            thinning: 10,
            chains: 2,
            leapfrog: 10,
            initial_hmc_step: 0.01,
            initial_hyper_sd: 0.1,
            hmc_target: 0.65,
            hyper_target: 0.23,
            truncation: DEFAULT_TRUNCATION,
            prior_shape: 0.01,
            prior_rate: 0.01,
            max_remainder_atoms: 2e5,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("p", 0.0, "at least one community required"));
        }
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
        require_positive("truncation", self.truncation)?;
        require_positive("prior_shape", self.prior_shape)?;
        require_positive("prior_rate", self.prior_rate)?;
        Ok(())
    }
}

/// Full sampler state for one chain.
#[derive(Debug, Clone)]
pub struct Stage1State {
    /// `log w_i0`, length V.
    pub log_w0: Vec<f64>,
    /// `log β_ik`, length V·p, row-major by node.
    pub log_beta: Vec<f64>,
    /// β-weighted remainder mass per community, length p.
    pub w_rem: Vec<f64>,
    pub ggp: GgpHyper,
    pub ccrm: CcrmHyper,
}

impl Stage1State {
    pub fn new(
        log_w0: Vec<f64>,
        log_beta: Vec<f64>,
        w_rem: Vec<f64>,
        ggp: GgpHyper,
        ccrm: CcrmHyper,
    ) -> Result<Self> {
        let p = ccrm.p();
        if w_rem.len() != p {
            return Err(Error::DimensionMismatch {
                what: "remainder masses",
                expected: p,
                got: w_rem.len(),
            });
        }
        if log_beta.len() != log_w0.len() * p {
            return Err(Error::DimensionMismatch {
                what: "community scores",
                expected: log_w0.len() * p,
                got: log_beta.len(),
            });
        }
        Ok(Stage1State {
            log_w0,
            log_beta,
            w_rem,
            ggp,
            ccrm,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.log_w0.len()
    }

    pub fn p(&self) -> usize {
        self.ccrm.p()
    }

    /// Per-community node weights `w_ik = w_i0 β_ik`, V·p row-major.
    pub fn weights(&self) -> Vec<f64> {
        let p = self.p();
        let mut w = Vec::with_capacity(self.log_beta.len());
        for (i, &u) in self.log_w0.iter().enumerate() {
            for k in 0..p {
                w.push((u + self.log_beta[i * p + k]).exp());
            }
        }
        w
    }

    pub fn w0(&self) -> Vec<f64> {
        self.log_w0.iter().map(|u| u.exp()).collect()
    }
}

/// Log-likelihood of a binary graph under pairwise rates `μ_ij = Σ_k w_ik w_jk`
/// plus an unobserved remainder mass `w_*`:
///
/// ```text
/// Σ_{edges} [log(1 - e^{-2Tμ_ij}) + 2Tμ_ij] - T Σ_k [(S_k + w_*k)² - Q_k]
/// ```
///
/// which is the usual edge/non-edge product rearranged so the cost is
/// O(E·p + V·p) instead of O(V²·p). The remainder enters only through the
/// exposure term (its within-remainder square is kept, its self-pair
/// correction dropped, consistent with it standing for many small atoms).
pub fn graph_loglik(
    graph: &BinaryGraph,
    weights: &[f64],
    w_rem: &[f64],
    horizon: f64,
) -> Result<f64> {
    require_positive("horizon", horizon)?;
    let v = graph.n_nodes();
    let p = w_rem.len();
    if p == 0 {
        return Err(Error::EmptyInput("remainder mass vector"));
    }
    if weights.len() != v * p {
        return Err(Error::DimensionMismatch {
            what: "weights",
            expected: v * p,
            got: weights.len(),
        });
    }
    let mut lp = 0.0;
    for k in 0..p {
        let mut s = w_rem[k];
        let mut q = 0.0;
        for i in 0..v {
            let w = weights[i * p + k];
            s += w;
            q += w * w;
        }
        lp -= horizon * (s * s - q);
    }
    for &(i, j) in graph.edges() {
        let mut mu = 0.0;
        for k in 0..p {
            mu += weights[i as usize * p + k] * weights[j as usize * p + k];
        }
        let x = 2.0 * horizon * mu;
        lp += (-(-x).exp_m1()).ln() + x;
    }
    Ok(lp)
}

/// Log-density (up to a constant) and gradient of the conditional weight
/// target in log coordinates, given latent interaction counts.
///
/// `position` is `[u_0 .. u_{V-1}, v_00 .. v_{V-1,p-1}]`; `counts` holds
/// `m_ik = Σ_j ñ_ijk` in the same V·p layout. Returns `None` when the value
/// or gradient is non-finite, which a Hamiltonian update treats as leaving
/// the support.
pub fn weight_target(
    position: &[f64],
    counts: &[f64],
    w_rem: &[f64],
    ggp: &GgpHyper,
    ccrm: &CcrmHyper,
    horizon: f64,
) -> Option<(f64, Vec<f64>)> {
    let p = ccrm.p();
    assert_eq!(counts.len() % p, 0, "counts length must be a multiple of p");
    let v = counts.len() / p;
    assert_eq!(position.len(), v * (p + 1), "position must hold u and v blocks");
    assert_eq!(w_rem.len(), p, "one remainder mass per community");

    let (us, vs) = position.split_at(v);
    let mut w = vec![0.0; v * p];
    // s_k accumulates S_k + w_*k; the exposure needs the remainder folded in.
    let mut s = w_rem.to_vec();
    let mut q = vec![0.0; p];
    for i in 0..v {
        for k in 0..p {
            let wik = (us[i] + vs[i * p + k]).exp();
            w[i * p + k] = wik;
            s[k] += wik;
            q[k] += wik * wik;
        }
    }

    let mut lp = 0.0;
    let mut grad = vec![0.0; v * (p + 1)];
    for (i, &u) in us.iter().enumerate() {
        let w0 = u.exp();
        lp += -ggp.sigma * u - ggp.tau * w0;
        let mut gu = -ggp.sigma - ggp.tau * w0;
        for k in 0..p {
            let vik = vs[i * p + k];
            let wik = w[i * p + k];
            let beta = wik / w0;
            let m = counts[i * p + k];
            lp += ccrm.a[k] * vik - ccrm.b[k] * beta + m * (u + vik);
            let cross = 2.0 * horizon * wik * (s[k] - wik);
            gu += m - cross;
            grad[v + i * p + k] = ccrm.a[k] - ccrm.b[k] * beta + m - cross;
        }
        grad[i] = gu;
    }
    for k in 0..p {
        lp -= horizon * (s[k] * s[k] - q[k]);
    }

    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some((lp, grad))
}

/// Draws the latent per-community counts for every edge and accumulates them
/// into node totals `m_ik`. Each edge draws a zero-truncated Poisson total at
/// rate `2T Σ_k w_ik w_jk` and splits it multinomially across communities.
fn sample_latent_counts<R: Rng + ?Sized>(
    graph: &BinaryGraph,
    weights: &[f64],
    p: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let v = graph.n_nodes();
    let mut m = vec![0.0; v * p];
    let mut rates = vec![0.0; p];
    for &(i, j) in graph.edges() {
        let (i, j) = (i as usize, j as usize);
        let mut total = 0.0;
        for k in 0..p {
            rates[k] = 2.0 * horizon * weights[i * p + k] * weights[j * p + k];
            total += rates[k];
        }
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid(
                "edge_rate",
                total,
                "observed edge between nodes with zero interaction rate",
            ));
        }
        let n = zero_truncated_poisson(rng, total)?;
        let split = multinomial_split(rng, n, &rates);
        for k in 0..p {
            m[i * p + k] += split[k] as f64;
            m[j * p + k] += split[k] as f64;
        }
    }
    Ok(m)
}

/// One Hamiltonian update of all log-weights given latent counts.
fn hmc_update_weights<R: Rng + ?Sized>(
    state: &mut Stage1State,
    counts: &[f64],
    horizon: f64,
    leapfrog: usize,
    step: f64,
    rng: &mut R,
) -> (bool, f64) {
    let v = state.n_nodes();
    let mut x = Vec::with_capacity(v * (state.p() + 1));
    x.extend_from_slice(&state.log_w0);
    x.extend_from_slice(&state.log_beta);
    let ggp = state.ggp;
    let ccrm = state.ccrm.clone();
    let w_rem = state.w_rem.clone();
    let target = |pos: &[f64]| weight_target(pos, counts, &w_rem, &ggp, &ccrm, horizon);
    let out = hmc_update(&mut x, &target, leapfrog, step, rng);
    state.log_w0.copy_from_slice(&x[..v]);
    state.log_beta.copy_from_slice(&x[v..]);
    out
}

struct HyperMove {
    /// Per-coordinate acceptance probabilities, in [`transformed_coords`]
    /// order.
    accept_probs: Vec<f64>,
    /// Proposals refused before evaluation (construction failure or remainder
    /// atom cap), as opposed to ordinary Metropolis rejections.
    guarded: usize,
}

/// Sums over the current weights that the hyperparameter target needs.
struct WeightStats {
    n: usize,
    sum_u: f64,
    sum_w0: f64,
    sum_v: Vec<f64>,
    sum_beta: Vec<f64>,
    s: Vec<f64>,
    q: Vec<f64>,
}

fn weight_stats(state: &Stage1State) -> WeightStats {
    let v = state.n_nodes();
    let p = state.p();
    let mut stats = WeightStats {
        n: v,
        sum_u: 0.0,
        sum_w0: 0.0,
        sum_v: vec![0.0; p],
        sum_beta: vec![0.0; p],
        s: vec![0.0; p],
        q: vec![0.0; p],
    };
    for i in 0..v {
        let u = state.log_w0[i];
        let w0 = u.exp();
        stats.sum_u += u;
        stats.sum_w0 += w0;
        for k in 0..p {
            let vik = state.log_beta[i * p + k];
            let beta = vik.exp();
            stats.sum_v[k] += vik;
            stats.sum_beta[k] += beta;
            let w = w0 * beta;
            stats.s[k] += w;
            stats.q[k] += w * w;
        }
    }
    stats
}

/// Hyperparameter target on the log-transformed coordinates
/// `t = (log α, log(1-σ), log τ, log a_1.., log b_1..)`, with the remainder
/// mass `w_*` treated as given (its own conditional-prior density cancels
/// against the refresh proposal and is therefore omitted).
fn hyper_log_target(
    stats: &WeightStats,
    ggp: &GgpHyper,
    ccrm: &CcrmHyper,
    w_rem: &[f64],
    t: &[f64],
    horizon: f64,
    cfg: &Stage1Config,
) -> f64 {
    let v = stats.n as f64;
    let mut lp = v * ggp.alpha.ln();
    lp += (-1.0 - ggp.sigma) * stats.sum_u - ggp.tau * stats.sum_w0 - v * ln_gamma(1.0 - ggp.sigma);
    for k in 0..ccrm.p() {
        lp += (ccrm.a[k] - 1.0) * stats.sum_v[k] - ccrm.b[k] * stats.sum_beta[k]
            + v * (ccrm.a[k] * ccrm.b[k].ln() - ln_gamma(ccrm.a[k]));
        let total = stats.s[k] + w_rem[k];
        lp -= horizon * (total * total - stats.q[k]);
    }
    // Gamma priors on the natural coordinates plus the log Jacobians of the
    // transform collapse to shape·t - rate·e^t per coordinate.
    for &ti in t {
        lp += cfg.prior_shape * ti - cfg.prior_rate * ti.exp();
    }
    lp
}

fn transformed_coords(ggp: &GgpHyper, ccrm: &CcrmHyper) -> Vec<f64> {
    let mut t = Vec::with_capacity(3 + 2 * ccrm.p());
    t.push(ggp.alpha.ln());
    t.push((1.0 - ggp.sigma).ln());
    t.push(ggp.tau.ln());
    t.extend(ccrm.a.iter().map(|a| a.ln()));
    t.extend(ccrm.b.iter().map(|b| b.ln()));
    t
}

/// One sweep of single-coordinate random-walk updates over (α, σ, τ, a, b),
/// each proposing the remainder mass jointly from its conditional prior
/// under the proposed hyperparameters. Because that proposal density equals
/// the corresponding target factor, the acceptance ratio only involves the
/// terms in [`hyper_log_target`]; the refresh is what ties α to the data
/// through the exposure penalty. Coordinate-wise moves let each scale adapt
/// separately — the posterior is far wider in some coordinates than others,
/// and a blocked move with one shared scale mixes at the pace of the
/// narrowest.
fn mh_update_hyper<R: Rng + ?Sized>(
    state: &mut Stage1State,
    horizon: f64,
    cfg: &Stage1Config,
    sds: &[f64],
    rng: &mut R,
) -> HyperMove {
    let p = state.p();
    let stats = weight_stats(state);
    debug_assert_eq!(sds.len(), 3 + 2 * p);
    let mut accept_probs = Vec::with_capacity(sds.len());
    let mut guarded = 0usize;

    for (c, &sd) in sds.iter().enumerate() {
        let t = transformed_coords(&state.ggp, &state.ccrm);
        let mut t_prop = t.clone();
        t_prop[c] += sd * rng.sample::<f64, _>(StandardNormal);

        let built: Result<(GgpHyper, CcrmHyper, GgpAtomSampler)> = (|| {
            let ggp = GgpHyper::new(t_prop[0].exp(), 1.0 - t_prop[1].exp(), t_prop[2].exp())?;
            let a: Vec<f64> = t_prop[3..3 + p].iter().map(|x| x.exp()).collect();
            let b: Vec<f64> = t_prop[3 + p..].iter().map(|x| x.exp()).collect();
            let ccrm = CcrmHyper::new(a, b)?;
            let expected_atoms = match ggp.total_mass() {
                TotalMass::Finite(mass) => mass,
                TotalMass::Infinite => ggp.truncated_mass(cfg.truncation)?,
            };
            if !(expected_atoms <= cfg.max_remainder_atoms) {
                return Err(Error::invalid(
                    "remainder_atoms",
                    expected_atoms,
                    "expected remainder atom count exceeds the configured cap",
                ));
            }
            let sampler = GgpAtomSampler::new(&ggp, cfg.truncation)?;
            Ok((ggp, ccrm, sampler))
        })();
        let Ok((ggp_new, ccrm_new, sampler)) = built else {
            accept_probs.push(0.0);
            guarded += 1;
            continue;
        };
        let w_rem_new = sampler.sample_weighted_totals(&ccrm_new, rng);

        let lp_old =
            hyper_log_target(&stats, &state.ggp, &state.ccrm, &state.w_rem, &t, horizon, cfg);
        let lp_new = hyper_log_target(
            &stats, &ggp_new, &ccrm_new, &w_rem_new, &t_prop, horizon, cfg,
        );
        let log_ratio = lp_new - lp_old;
        let accept_prob = if log_ratio.is_nan() {
            0.0
        } else {
            log_ratio.exp().min(1.0)
        };
        if rng.random::<f64>() < accept_prob {
            state.ggp = ggp_new;
            state.ccrm = ccrm_new;
            state.w_rem = w_rem_new;
        }
        accept_probs.push(accept_prob);
    }
    HyperMove {
        accept_probs,
        guarded,
    }
}

fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Collapsed log-posterior (graph likelihood + atom and hyper priors) used
/// as a scalar convergence trace; the latent counts are integrated out so the
/// trace is comparable across sweeps.
fn state_logpost(
    graph: &BinaryGraph,
    state: &Stage1State,
    horizon: f64,
    cfg: &Stage1Config,
) -> Result<f64> {
    let weights = state.weights();
    let mut lp = graph_loglik(graph, &weights, &state.w_rem, horizon)?;
    let p = state.p();
    lp += state.n_nodes() as f64 * state.ggp.alpha.ln();
    for (i, &u) in state.log_w0.iter().enumerate() {
        lp += state.ggp.log_levy_density(u.exp());
        for k in 0..p {
            lp += ln_gamma_pdf(
                state.log_beta[i * p + k].exp(),
                state.ccrm.a[k],
                state.ccrm.b[k],
            );
        }
    }
    for x in [
        state.ggp.alpha,
        1.0 - state.ggp.sigma,
        state.ggp.tau,
    ]
    .into_iter()
    .chain(state.ccrm.a.iter().copied())
    .chain(state.ccrm.b.iter().copied())
    {
        lp += ln_gamma_pdf(x, cfg.prior_shape, cfg.prior_rate);
    }
    Ok(lp)
}

/// Hard clustering of adjacency rows (cosine k-means with farthest-first
/// seeding), used purely as a starting point for the score allocation. The
/// latent-count sweep is strongly mode-sticky: from symmetric scores, which
/// community split a chain locks into is decided by the first few count
/// draws, and a wrong lock-in shows up as smeared pair rates rather than as
/// an obvious convergence failure. Seeding every chain from the same
/// data-driven split removes that roulette.
fn cluster_nodes<R: Rng + ?Sized>(graph: &BinaryGraph, p: usize, rng: &mut R) -> Vec<usize> {
    let v = graph.n_nodes();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); v];
    for &(i, j) in graph.edges() {
        rows[i as usize].push(j as usize);
        rows[j as usize].push(i as usize);
    }

    // Cosine similarity of a binary row against a dense centroid.
    let sim = |row: &[usize], center: &[f64]| -> f64 {
        if row.is_empty() {
            return 0.0;
        }
        let dot: f64 = row.iter().map(|&j| center[j]).sum();
        let norm: f64 = center.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 0.0 {
            dot / (norm * (row.len() as f64).sqrt())
        } else {
            0.0
        }
    };
    let densify = |row: &[usize]| -> Vec<f64> {
        let mut x = vec![0.0; v];
        for &j in row {
            x[j] = 1.0;
        }
        x
    };

    // Farthest-first seeding from a random node.
    let mut centers: Vec<Vec<f64>> = vec![densify(&rows[rng.random_range(0..v)])];
    while centers.len() < p {
        let far = (0..v)
            .max_by(|&x, &y| {
                let best = |i: usize| {
                    centers
                        .iter()
                        .map(|c| sim(&rows[i], c))
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                best(x).partial_cmp(&best(y)).unwrap().reverse()
            })
            .unwrap();
        centers.push(densify(&rows[far]));
    }

    let mut assign = vec![0usize; v];
    let mut best_sim = vec![0.0f64; v];
    for _ in 0..10 {
        for (i, row) in rows.iter().enumerate() {
            let (k, s) = (0..p)
                .map(|k| (k, sim(row, &centers[k])))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            assign[i] = k;
            best_sim[i] = s;
        }
        let mut counts = vec![0usize; p];
        for c in centers.iter_mut() {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        for (i, row) in rows.iter().enumerate() {
            counts[assign[i]] += 1;
            for &j in row {
                centers[assign[i]][j] += 1.0;
            }
        }
        for (k, c) in centers.iter_mut().enumerate() {
            if counts[k] == 0 {
                // Re-seed an emptied cluster at the worst-explained node.
                let worst = (0..v)
                    .min_by(|&x, &y| best_sim[x].partial_cmp(&best_sim[y]).unwrap())
                    .unwrap();
                *c = densify(&rows[worst]);
            } else {
                c.iter_mut().for_each(|x| *x /= counts[k] as f64);
            }
        }
    }
    assign
}

/// Degree-matched starting point with per-chain jitter: node sociabilities
/// proportional to degree + 1 and scaled so the implied total exposure
/// matches the observed edge count, scores concentrated on the node's
/// adjacency cluster.
fn initial_state<R: Rng + ?Sized>(
    graph: &BinaryGraph,
    horizon: f64,
    cfg: &Stage1Config,
    rng: &mut R,
) -> Result<Stage1State> {
    let v = graph.n_nodes();
    let p = cfg.p;
    let jitter = |scale: f64, rng: &mut R| (scale * rng.sample::<f64, _>(StandardNormal)).exp();

    let tau0 = jitter(0.2, rng);
    let a: Vec<f64> = (0..p).map(|_| jitter(0.2, rng)).collect();
    let b: Vec<f64> = (0..p).map(|_| jitter(0.2, rng)).collect();
    let ccrm = CcrmHyper::new(a, b)?;

    let degrees = graph.degrees();
    let d_total: f64 = degrees.iter().map(|&d| (d + 1) as f64).sum();
    let mean_sq: f64 = ccrm.mean_scores().iter().map(|m| m * m).sum();
    let scale = (graph.n_edges().max(1) as f64 / (horizon * mean_sq)).sqrt() / d_total;
    let log_w0: Vec<f64> = degrees
        .iter()
        .map(|&d| (scale * (d as f64 + 1.0)).ln() + 0.1 * rng.sample::<f64, _>(StandardNormal))
        .collect();

    // Match the initial GGP mass to the observed sociability total: at σ = 0
    // the expected total mass is α/τ, so the first remainder refresh stays on
    // the scale of the observed part. Starting α at the node count instead
    // plants the chain in a basin where the refresh swamps the exposure
    // penalty with phantom mass, and escaping it needs a coordinated α/τ
    // move that a cooled-down proposal almost never makes.
    let sum_w0: f64 = log_w0.iter().map(|u| u.exp()).sum();
    let mut alpha0 = tau0 * sum_w0 * jitter(0.2, rng);
    let ggp = GgpHyper::new(alpha0, 0.0, tau0)?;
    // Keep the initial remainder refresh comfortably under the atom cap.
    let expected = ggp.truncated_mass(cfg.truncation)?;
    if expected > 0.5 * cfg.max_remainder_atoms {
        alpha0 *= 0.5 * cfg.max_remainder_atoms / expected;
    }
    let ggp = GgpHyper::new(alpha0, 0.0, tau0)?;

    // Concentrate each node's initial scores on its adjacency cluster while
    // keeping the per-node total at the prior mean, so the degree-matched
    // sociability scale above stays valid.
    let clusters = if p > 1 && v >= 2 * p {
        Some(cluster_nodes(graph, p, rng))
    } else {
        None
    };
    let own_share = 0.7;
    let total_mean: f64 = ccrm.mean_scores().iter().sum();
    let mut log_beta = Vec::with_capacity(v * p);
    for i in 0..v {
        for k in 0..p {
            let target = match &clusters {
                Some(cl) if cl[i] == k => own_share * total_mean,
                Some(_) => (1.0 - own_share) * total_mean / (p as f64 - 1.0),
                None => ccrm.a[k] / ccrm.b[k],
            };
            log_beta.push(target.ln() + 0.1 * rng.sample::<f64, _>(StandardNormal));
        }
    }

    let sampler = GgpAtomSampler::new(&ggp, cfg.truncation)?;
    let w_rem = sampler.sample_weighted_totals(&ccrm, rng);
    Stage1State::new(log_w0, log_beta, w_rem, ggp, ccrm)
}

/// Thinned posterior draw of everything the later stages consume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Snapshot {
    pub w0: Vec<f64>,
    /// `w_ik = w_i0 β_ik`, V·p row-major.
    pub w: Vec<f64>,
    pub w_rem: Vec<f64>,
    pub ggp: GgpHyper,
    pub ccrm: CcrmHyper,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Chain {
    pub snapshots: Vec<Stage1Snapshot>,
    /// Collapsed log-posterior at every sweep, for convergence diagnostics.
    pub logpost: Vec<f64>,
    /// Mean Hamiltonian acceptance probability over all sweeps.
    pub hmc_accept: f64,
    pub hyper_accept: f64,
    pub final_hmc_step: f64,
    /// Geometric mean of the per-coordinate hyper proposal scales.
    pub final_hyper_sd: f64,
    /// Hyper proposals refused by the remainder-atom guard.
    pub guard_rejects: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stage1Samples {
    pub chains: Vec<Stage1Chain>,
}

impl Stage1Samples {
    /// Snapshots pooled across chains, chain-major.
    pub fn pooled(&self) -> Vec<&Stage1Snapshot> {
        self.chains.iter().flat_map(|c| &c.snapshots).collect()
    }

    /// Split potential scale reduction of the log-posterior traces.
    pub fn logpost_psrf(&self) -> Result<f64> {
        let traces: Vec<Vec<f64>> = self.chains.iter().map(|c| c.logpost.clone()).collect();
        potential_scale_reduction(&traces)
    }
}

/// Runs the graph-stage sampler: `cfg.chains` independent chains, each a
/// sequence of latent-count, weight, and hyperparameter sweeps. Chains run
/// in parallel on derived, non-overlapping random streams, so results do not
/// depend on scheduling.
pub fn run_stage1(
    graph: &BinaryGraph,
    horizon: f64,
    cfg: &Stage1Config,
    seed: u64,
) -> Result<Stage1Samples> {
    require_positive("horizon", horizon)?;
    cfg.validate()?;
    if graph.n_edges() == 0 {
        return Err(Error::EmptyInput("graph has no edges"));
    }
    let chains: Vec<Result<Stage1Chain>> = exec::map_indexed(cfg.chains, |c| {
        let mut rng = stream(seed, Domain::Stage1Chains, c as u64);
        run_chain(graph, horizon, cfg, &mut rng)
    });
    let chains = chains.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Stage1Samples { chains })
}

fn run_chain<R: Rng + ?Sized>(
    graph: &BinaryGraph,
    horizon: f64,
    cfg: &Stage1Config,
    rng: &mut R,
) -> Result<Stage1Chain> {
    let mut state = initial_state(graph, horizon, cfg, rng)?;
    let mut hmc_step = AdaptiveStep::new(cfg.initial_hmc_step, cfg.hmc_target);
    let mut hyper_sds: Vec<AdaptiveStep> = (0..3 + 2 * cfg.p)
        .map(|_| AdaptiveStep::new(cfg.initial_hyper_sd, cfg.hyper_target))
        .collect();
    // Freeze adaptation halfway through burn-in; the remaining burn-in lets
    // the chain settle under the final kernel.
    let adapt_until = cfg.burn_in / 2;

    let mut snapshots = Vec::new();
    let mut logpost = Vec::with_capacity(cfg.iterations);
    let mut hmc_prob_sum = 0.0;
    let mut hyper_prob_sum = 0.0;
    let mut guard_rejects = 0usize;

    for it in 0..cfg.iterations {
        let counts = sample_latent_counts(graph, &state.weights(), cfg.p, horizon, rng)?;
        let (_, hmc_prob) = hmc_update_weights(
            &mut state,
            &counts,
            horizon,
            cfg.leapfrog,
            hmc_step.step(),
            rng,
        );
        if it < adapt_until {
            hmc_step.adapt(hmc_prob);
        }
        hmc_prob_sum += hmc_prob;

        let sds: Vec<f64> = hyper_sds.iter().map(AdaptiveStep::step).collect();
        let mv = mh_update_hyper(&mut state, horizon, cfg, &sds, rng);
        if it < adapt_until {
            for (step, &prob) in hyper_sds.iter_mut().zip(&mv.accept_probs) {
                step.adapt(prob);
            }
        }
        hyper_prob_sum += mv.accept_probs.iter().sum::<f64>() / mv.accept_probs.len() as f64;
        guard_rejects += mv.guarded;

        logpost.push(state_logpost(graph, &state, horizon, cfg)?);
        if it >= cfg.burn_in && (it - cfg.burn_in) % cfg.thinning == 0 {
            snapshots.push(Stage1Snapshot {
                w0: state.w0(),
                w: state.weights(),
                w_rem: state.w_rem.clone(),
                ggp: state.ggp,
                ccrm: state.ccrm.clone(),
            });
        }
    }

    let n = cfg.iterations as f64;
    Ok(Stage1Chain {
        snapshots,
        logpost,
        hmc_accept: hmc_prob_sum / n,
        hyper_accept: hyper_prob_sum / n,
        final_hmc_step: hmc_step.step(),
        final_hyper_sd: (hyper_sds.iter().map(|s| s.step().ln()).sum::<f64>()
            / hyper_sds.len() as f64)
            .exp(),
        guard_rejects,
    })
}

/// Posterior point estimate of the weights and base rates.
///
/// Base rates are estimated by the posterior mean of `Σ_k w_ik w_jk`, which
/// is invariant to community relabeling and therefore immune to the column
/// smearing that averaging weights across label-switching snapshots causes.
/// The aligned-average weights are kept alongside for interpretation; when
/// the rate table is absent, `mu_hat` falls back to their product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointEstimate {
    pub w0_hat: Vec<f64>,
    /// V·p row-major.
    pub w_hat: Vec<f64>,
    pub w_rem_hat: Vec<f64>,
    /// Posterior-mean base rates for unordered pairs `i < j`, packed row by
    /// row (`(0,1) .. (0,V-1), (1,2) ..`).
    #[serde(default)]
    pub mu_mean: Option<Vec<f64>>,
    pub ggp: GgpHyper,
    pub ccrm: CcrmHyper,
}

impl PointEstimate {
    pub fn n_nodes(&self) -> usize {
        self.w0_hat.len()
    }

    pub fn p(&self) -> usize {
        self.ccrm.p()
    }

    /// Estimated base rate for the unordered pair `(i, j)`.
    pub fn mu_hat(&self, i: usize, j: usize) -> f64 {
        if i != j {
            if let Some(mu) = &self.mu_mean {
                let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                return mu[lo * self.n_nodes() - lo * (lo + 1) / 2 + (hi - lo - 1)];
            }
        }
        let p = self.p();
        (0..p)
            .map(|k| self.w_hat[i * p + k] * self.w_hat[j * p + k])
            .sum()
    }

    /// Symmetric pair rates floored at [`MU_FLOOR`] for downstream
    /// event-time likelihoods.
    pub fn pair_rates(&self, i: usize, j: usize) -> crate::hawkes::PairRates {
        let mu = self.mu_hat(i, j).max(MU_FLOOR);
        crate::hawkes::PairRates {
            forward: mu,
            backward: mu,
        }
    }
}

/// Averages pooled snapshots into a [`PointEstimate`] after aligning each
/// snapshot's community columns to the first snapshot. Community labels are
/// exchangeable under the prior, so averaging raw columns would mix separate
/// communities whenever chains label them differently; alignment by minimum
/// total squared column distance removes that ambiguity.
pub fn mbr_point_estimate(samples: &Stage1Samples) -> Result<PointEstimate> {
    let pooled = samples.pooled();
    let Some(reference) = pooled.first() else {
        return Err(Error::EmptyInput("no snapshots to summarize"));
    };
    let v = reference.w0.len();
    let p = reference.ccrm.p();

    let mut w0_hat = vec![0.0; v];
    let mut w_hat = vec![0.0; v * p];
    let mut w_rem_hat = vec![0.0; p];
    let mut mu_mean = vec![0.0; v * (v - 1) / 2];
    let mut a_hat = vec![0.0; p];
    let mut b_hat = vec![0.0; p];
    let (mut alpha, mut sigma, mut tau) = (0.0, 0.0, 0.0);

    for snap in &pooled {
        if snap.w0.len() != v || snap.w.len() != v * p || snap.ccrm.p() != p {
            return Err(Error::DimensionMismatch {
                what: "snapshot",
                expected: v * p,
                got: snap.w.len(),
            });
        }
        let perm = align_columns(&reference.w, &snap.w, v, p);
        for i in 0..v {
            w0_hat[i] += snap.w0[i];
            for (r, &c) in perm.iter().enumerate() {
                w_hat[i * p + r] += snap.w[i * p + c];
            }
        }
        let mut idx = 0;
        for i in 0..v {
            for j in i + 1..v {
                let mu: f64 = (0..p).map(|k| snap.w[i * p + k] * snap.w[j * p + k]).sum();
                mu_mean[idx] += mu;
                idx += 1;
            }
        }
        for (r, &c) in perm.iter().enumerate() {
            w_rem_hat[r] += snap.w_rem[c];
            a_hat[r] += snap.ccrm.a[c];
            b_hat[r] += snap.ccrm.b[c];
        }
        alpha += snap.ggp.alpha;
        sigma += snap.ggp.sigma;
        tau += snap.ggp.tau;
    }

    let n = pooled.len() as f64;
    for x in w0_hat
        .iter_mut()
        .chain(w_hat.iter_mut())
        .chain(w_rem_hat.iter_mut())
        .chain(mu_mean.iter_mut())
        .chain(a_hat.iter_mut())
        .chain(b_hat.iter_mut())
    {
        *x /= n;
    }
    Ok(PointEstimate {
        w0_hat,
        w_hat,
        w_rem_hat,
        mu_mean: Some(mu_mean),
        ggp: GgpHyper::new(alpha / n, sigma / n, tau / n)?,
        ccrm: CcrmHyper::new(a_hat, b_hat)?,
    })
}

/// Permutation `perm` such that candidate column `perm[r]` matches reference
/// column `r`, minimizing the total squared distance. Exhaustive search up to
/// p = 6, assignment-problem relaxation beyond.
fn align_columns(reference: &[f64], candidate: &[f64], v: usize, p: usize) -> Vec<usize> {
    if p == 1 {
        return vec![0];
    }
    let mut cost = vec![vec![0.0; p]; p];
    for i in 0..v {
        for r in 0..p {
            for (c, row) in cost[r].iter_mut().enumerate() {
                let d = candidate[i * p + c] - reference[i * p + r];
                *row += d * d;
            }
        }
    }
    if p <= 6 {
        (0..p)
            .permutations(p)
            .map(|perm| {
                let total: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
                (total, perm)
            })
            .min_by(|x, y| x.0.total_cmp(&y.0))
            .expect("p >= 2 yields permutations")
            .1
    } else {
        hungarian(&cost)
    }
}

/// Minimum-cost assignment on a square cost matrix via shortest augmenting
/// paths with potentials, O(n³). Returns the column assigned to each row.
pub(crate) fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    // p[j] = row matched to column j; column n is a virtual start, row n the
    // "unmatched" sentinel.
    let mut p = vec![n; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 0..n {
        p[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0][j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == n {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 0..n {
        if p[j] != n {
            assignment[p[j]] = j;
        }
    }
    assignment
}
