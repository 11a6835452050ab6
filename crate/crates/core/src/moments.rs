//! Closed-form, quadrature, and Monte Carlo moment calculators.
//!
//! For a network with GGP(α, σ, τ) sociabilities, Gamma(a_k, b_k) scores,
//! kernel (η, δ), and horizon T (all per-unit-α quantities written ψ, ρ, m):
//!
//! ```text
//! E[#interactions] = α² (Σ_k m_k²) · ( δ/(δ-η)·T - η/(δ-η)²·(1 - e^{-T(δ-η)}) )
//! E[#edges]        = (α²/2) ∫ ψ(2T w) ρ(dw)
//! E[#nodes]        = α ∫ (1 - e^{-α ψ(2T w)}) ρ(dw)
//! ```
//!
//! with `m_k = (a_k/b_k)·τ^{σ-1}`. The edge/node integrals run against the
//! compound measure; sampling `w = w0·β` reduces them to an outer integral
//! over `w0 ~ ρ0` and an inner expectation over the gamma scores. The
//! `Quadrature` method nests adaptive rules (exact up to tolerance, p = 1
//! only); `MonteCarlo` samples the Lévy measure — exactly for σ < 0, with an
//! explicit truncation-bias bound for σ ≥ 0 — and works for any p.
//!
//! The edge and node counts do not depend on the kernel: a pair's
//! probability of staying silent is `e^{-2Tμ_ij}` regardless of (η, δ),
//! because excitation only starts after a first event.

use crate::error::{require_positive, Error, Result};
use crate::exec;
use crate::generator::{generate, GeneratorConfig};
use crate::hawkes::{expected_count, KernelParams};
use crate::measures::{gamma_rate, CcrmHyper, GgpAtomSampler, GgpHyper, LevyMoments, TotalMass};
use crate::quadrature;
use crate::rng::{stream, Domain};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How to evaluate the edge/node integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentMethod {
    /// Nested adaptive quadrature. Only implemented for p = 1.
    Quadrature,
    /// Monte Carlo over the Lévy measure: exact sampling for σ < 0,
    /// `truncation`-restricted sampling with a reported bias bound for σ ≥ 0.
    MonteCarlo {
        samples: usize,
        seed: u64,
        truncation: f64,
    },
}

impl MomentMethod {
    /// Monte Carlo defaults: 20k samples, truncation 1e-6.
    pub fn monte_carlo(seed: u64) -> Self {
        MomentMethod::MonteCarlo { samples: 20_000, seed, truncation: 1e-6 }
    }
}

/// A moment value with its uncertainty, when the method has any.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    /// Monte Carlo standard error (`None` for quadrature).
    pub std_error: Option<f64>,
    /// Upper bound on the mass neglected below the truncation level
    /// (`None` when sampling is exact).
    pub truncation_bias_bound: Option<f64>,
}

impl MomentEstimate {
    fn exact(value: f64) -> Self {
        MomentEstimate { value, std_error: None, truncation_bias_bound: None }
    }
}

/// Closed-form expected number of directed interactions over `[0, horizon]`.
pub fn expected_interactions(
    ggp: &GgpHyper,
    ccrm: &CcrmHyper,
    kernel: &KernelParams,
    horizon: f64,
) -> Result<f64> {
    require_positive("horizon", horizon)?;
    let lm = LevyMoments::new(*ggp, ccrm.clone());
    let weight_sq: f64 = lm.mean_w().iter().map(|m| m * m).sum();
    // expected_count at μ = 1 is exactly the kernel time factor.
    Ok(ggp.alpha * ggp.alpha * weight_sq * expected_count(1.0, kernel, horizon)?)
}

/// Expected number of undirected edges after horizon `horizon`.
pub fn expected_edges(
    ggp: &GgpHyper,
    ccrm: &CcrmHyper,
    horizon: f64,
    method: MomentMethod,
) -> Result<MomentEstimate> {
    require_positive("horizon", horizon)?;
    let lm = LevyMoments::new(*ggp, ccrm.clone());
    let half_a2 = 0.5 * ggp.alpha * ggp.alpha;
    match method {
        MomentMethod::Quadrature => {
            let integral =
                levy_compound_integral(&lm, |wprod| lm.psi(&[2.0 * horizon * wprod]))?;
            Ok(MomentEstimate::exact(half_a2 * integral))
        }
        MomentMethod::MonteCarlo { samples, seed, truncation } => {
            let mc = monte_carlo_compound(&lm, samples, seed, truncation, horizon, |psi_val| {
                Ok(psi_val)
            })?;
            Ok(MomentEstimate {
                value: half_a2 * mc.mean,
                std_error: Some(half_a2 * mc.std_error),
                truncation_bias_bound: mc.bias_unit.map(|b| half_a2 * b),
            })
        }
    }
}

/// Expected number of active nodes after horizon `horizon`.
pub fn expected_nodes(
    ggp: &GgpHyper,
    ccrm: &CcrmHyper,
    horizon: f64,
    method: MomentMethod,
) -> Result<MomentEstimate> {
    require_positive("horizon", horizon)?;
    let lm = LevyMoments::new(*ggp, ccrm.clone());
    let alpha = ggp.alpha;
    match method {
        MomentMethod::Quadrature => {
            let integral = levy_compound_integral(&lm, |wprod| {
                Ok(-(-alpha * lm.psi(&[2.0 * horizon * wprod])?).exp_m1())
            })?;
            Ok(MomentEstimate::exact(alpha * integral))
        }
        MomentMethod::MonteCarlo { samples, seed, truncation } => {
            let mc = monte_carlo_compound(&lm, samples, seed, truncation, horizon, |psi_val| {
                Ok(-(-alpha * psi_val).exp_m1())
            })?;
            Ok(MomentEstimate {
                value: alpha * mc.mean,
                std_error: Some(alpha * mc.std_error),
                // 1 - e^{-αψ} ≤ αψ, so the neglected mass is bounded by α
                // times the edge-integrand bound.
                truncation_bias_bound: mc.bias_unit.map(|b| alpha * alpha * b),
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Quadrature path (p = 1)
// ---------------------------------------------------------------------------

/// Integrates `E_β[f(w0·β)]` against `ρ0(dw0)` for p = 1: the outer rule
/// sees an integrable `w^{-σ}` singularity at the origin (the inner
/// expectation vanishes linearly in `w0`) and an exponential tail.
fn levy_compound_integral<F>(lm: &LevyMoments, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if lm.ccrm.p() != 1 {
        return Err(Error::invalid(
            "p",
            lm.ccrm.p() as f64,
            "quadrature moments are implemented for exactly one community; use MonteCarlo",
        ));
    }
    let (a, b) = (lm.ccrm.a[0], lm.ccrm.b[0]);
    // Quadrature callbacks are infallible; stash the first inner error and
    // poison the integrand with NaN (which `integrate` reports as failure).
    let inner_error = std::cell::RefCell::new(None);
    let wrapped = |w0: f64| {
        match gamma_expectation(a, b, |beta| f(w0 * beta)) {
            Ok(v) => v * lm.ggp.levy_density(w0),
            Err(e) => {
                inner_error.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let head = quadrature::integrate_power_singularity(
        &wrapped,
        1.0,
        lm.ggp.sigma.max(0.0),
        1e-7,
        1e-12,
    );
    let tail = quadrature::integrate_exp_tail(&wrapped, 1.0, lm.ggp.tau, 1e-7, 1e-12);
    if let Some(e) = inner_error.into_inner() {
        return Err(e);
    }
    Ok(head?.value + tail?.value)
}

/// `E[g(β)]` for `β ~ Gamma(a, b)` by adaptive quadrature.
fn gamma_expectation<G: Fn(f64) -> Result<f64>>(a: f64, b: f64, g: G) -> Result<f64> {
    let log_norm = a * b.ln() - statrs::function::gamma::ln_gamma(a);
    let dens = |x: f64| (log_norm + (a - 1.0) * x.ln() - b * x).exp();
    let split = a.max(1.0) / b;
    let inner_error = std::cell::RefCell::new(None);
    let wrapped = |x: f64| match g(x) {
        Ok(v) => v * dens(x),
        Err(e) => {
            inner_error.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };
    let head = quadrature::integrate_power_singularity(
        &wrapped,
        split,
        (1.0 - a).max(0.0),
        1e-9,
        1e-13,
    );
    let tail = quadrature::integrate_exp_tail(&wrapped, split, b, 1e-9, 1e-13);
    if let Some(e) = inner_error.into_inner() {
        return Err(e);
    }
    Ok(head?.value + tail?.value)
}

// ---------------------------------------------------------------------------
// Monte Carlo path (any p)
// ---------------------------------------------------------------------------

struct McCompound {
    mean: f64,
    std_error: f64,
    /// Per-unit-weight bias bound for the neglected `(0, truncation)` mass,
    /// `None` when sampling was exact (σ < 0).
    bias_unit: Option<f64>,
}

/// Estimates `∫ g(ψ(2T w)) ρ(dw)` by sampling `w0` from the (restricted)
/// Lévy measure and `β` from the scores; `g` receives `ψ_unit(2T w0 β)`.
fn monte_carlo_compound<G>(
    lm: &LevyMoments,
    samples: usize,
    seed: u64,
    truncation: f64,
    horizon: f64,
    g: G,
) -> Result<McCompound>
where
    G: Fn(f64) -> Result<f64> + Sync + Send,
{
    if samples < 2 {
        return Err(Error::invalid("samples", samples as f64, "need at least 2"));
    }
    let sampler = GgpAtomSampler::new(&lm.ggp, truncation)?;
    // Per-unit-α mass of the sampled region.
    let weight = match lm.ggp.total_mass() {
        TotalMass::Finite(m) => m / lm.ggp.alpha,
        TotalMass::Infinite => lm.ggp.truncated_mass(truncation)? / lm.ggp.alpha,
    };
    let p = lm.ccrm.p();
    let values: Vec<Result<f64>> = exec::map_indexed(samples, |i| {
        let mut rng = stream(seed, Domain::Moments, i as u64);
        let w0 = sampler.sample_jump(&mut rng);
        let t: Vec<f64> = (0..p)
            .map(|k| 2.0 * horizon * w0 * gamma_rate(&mut rng, lm.ccrm.a[k], lm.ccrm.b[k]))
            .collect();
        g(lm.psi(&t)?)
    });
    let mut sum = 0.0;
    let mut sq = 0.0;
    for v in values {
        let v = v?;
        sum += v;
        sq += v * v;
    }
    let n = samples as f64;
    let mean_g = sum / n;
    let var_g = (sq / n - mean_g * mean_g).max(0.0);
    let bias_unit = match lm.ggp.total_mass() {
        TotalMass::Finite(_) => None,
        TotalMass::Infinite => {
            // ψ(t) ≤ Σ_k t_k m_k with m_k = (a_k/b_k)·τ^{σ-1}, so the
            // neglected head is at most 2T·τ^{σ-1}·Σ_k (a_k/b_k)² times
            // the sub-truncation mean ∫_0^ε w ρ0(dw).
            let score_sq: f64 = lm.ccrm.mean_scores().iter().map(|s| s * s).sum();
            let head_mass = lm.ggp.levy_head_integral(truncation, |w| w)?;
            Some(2.0 * horizon * lm.ggp.mean_sociability() * score_sq * head_mass)
        }
    };
    Ok(McCompound {
        mean: weight * mean_g,
        std_error: weight * (var_g / n).sqrt(),
        bias_unit,
    })
}

// ---------------------------------------------------------------------------
// Sparsity diagnostic
// ---------------------------------------------------------------------------

/// Empirical means for one α in a sparsity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityPoint {
    pub alpha: f64,
    pub mean_interactions: f64,
    pub mean_edges: f64,
    pub mean_nodes: f64,
    /// Closed-form E[#interactions] at this α, for reference.
    pub expected_interactions: f64,
}

/// Result of a sparsity sweep: per-α empirical means and the fitted
/// log-log slope of edges against nodes (≈ 2 in the dense regime σ < 0,
/// < 2 in the sparse regime σ ≥ 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityDiagnostic {
    pub points: Vec<SparsityPoint>,
    pub edge_node_slope: f64,
}

/// Simulates `replicates` networks at each α (holding everything else in
/// `base` fixed) and fits the log-log growth of edges against nodes.
pub fn sparsity_diagnostic(
    base: &GeneratorConfig,
    alphas: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<SparsityDiagnostic> {
    if alphas.len() < 2 {
        return Err(Error::EmptyInput("sparsity sweep needs at least two alphas"));
    }
    require_positive("replicates", replicates as f64)?;
    let runs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|ai| (0..replicates).map(move |r| (ai, r)))
        .collect();
    let stats: Vec<Result<(usize, f64, f64, f64)>> = exec::map_slice(&runs, |&(ai, r)| {
        let mut cfg = base.clone();
        cfg.ggp = GgpHyper::new(alphas[ai], base.ggp.sigma, base.ggp.tau)?;
        let run_seed = stream(seed, Domain::Replicates, (ai * replicates + r) as u64)
            .random::<u64>();
        let net = generate(&cfg, run_seed)?;
        let graph = crate::dataset::binary_projection(&net.dataset);
        Ok((
            ai,
            net.dataset.n_interactions() as f64,
            graph.n_edges() as f64,
            net.dataset.n_nodes() as f64,
        ))
    });
    let mut acc = vec![(0.0f64, 0.0f64, 0.0f64); alphas.len()];
    for s in stats {
        let (ai, i, e, v) = s?;
        acc[ai].0 += i;
        acc[ai].1 += e;
        acc[ai].2 += v;
    }
    let n = replicates as f64;
    let mut points = Vec::with_capacity(alphas.len());
    for (ai, &alpha) in alphas.iter().enumerate() {
        let ggp = GgpHyper::new(alpha, base.ggp.sigma, base.ggp.tau)?;
        points.push(SparsityPoint {
            alpha,
            mean_interactions: acc[ai].0 / n,
            mean_edges: acc[ai].1 / n,
            mean_nodes: acc[ai].2 / n,
            expected_interactions: expected_interactions(
                &ggp,
                &base.ccrm,
                &base.kernel,
                base.horizon,
            )?,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.mean_nodes.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_edges.ln()).collect();
    Ok(SparsityDiagnostic { points, edge_node_slope: ols_slope(&xs, &ys)? })
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::EmptyInput("slope needs matched samples of length >= 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("x", mx, "no variation in the regressor"));
    }
    Ok(sxy / sxx)
}
