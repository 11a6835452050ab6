//! Generalized gamma process (GGP) and compound community scores.
//!
//! The sociability measure has Lévy density
//!
//! ```text
//! ρ0(w) = w^{-1-σ} e^{-τ w} / Γ(1-σ),      σ < 1,  τ > 0,
//! ```
//!
//! scaled by the total-area parameter `α`. For `σ < 0` the process has a
//! finite number of atoms (Poisson count, Gamma(-σ, τ) jump sizes) and is
//! sampled exactly; for `σ ≥ 0` there are infinitely many atoms and the
//! sampler truncates jumps below a level `ε`, drawing the rest by inverse CDF
//! on a tabulated grid.
//!
//! Each atom `w_i0` is decorated with community scores `β_ik ~ Gamma(a_k, b_k)`
//! (shape–rate), producing affiliation weights `w_ik = w_i0 β_ik`. The
//! multivariate Laplace exponent of the compound measure reduces to a
//! one-dimensional integral against `ρ0`:
//!
//! ```text
//! ψ(t_1..t_p) = ∫ (1 - Π_k (1 + t_k w0 / b_k)^{-a_k}) ρ0(dw0)     (per unit α)
//! ```
//!
//! which is what the moment calculators and sparsity diagnostics consume.

use crate::error::{require_positive, Error, Result};
use crate::quadrature::{self, DEFAULT_REL_TOL};
use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Poisson};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;
use std::sync::RwLock;

/// Default truncation level for infinite-activity (σ ≥ 0) sampling.
pub const DEFAULT_TRUNCATION: f64 = 1e-3;

/// Grid size for the tabulated inverse CDF of truncated jumps.
const CDF_GRID: usize = 4096;

/// Relative tail mass ignored when bounding the tabulation range.
const TAIL_NEGLECT: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Hyperparameters
// ---------------------------------------------------------------------------

/// GGP hyperparameters `(α, σ, τ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GgpHyper {
    /// Total area of the base measure; scales the number of atoms.
    pub alpha: f64,
    /// Tail index, `σ < 1`. Negative gives finitely many atoms (dense
    /// graphs); `σ ∈ [0, 1)` gives infinite activity (sparse graphs).
    pub sigma: f64,
    /// Exponential tilt, `τ > 0`.
    pub tau: f64,
}

impl GgpHyper {
    pub fn new(alpha: f64, sigma: f64, tau: f64) -> Result<Self> {
        require_positive("alpha", alpha)?;
        require_positive("tau", tau)?;
        if !sigma.is_finite() || sigma >= 1.0 {
            return Err(Error::invalid("sigma", sigma, "must be finite and < 1"));
        }
        Ok(GgpHyper { alpha, sigma, tau })
    }

    /// Lévy density `ρ0(w)` (per unit α).
    pub fn levy_density(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        self.log_levy_density(w).exp()
    }

    /// `log ρ0(w)`; `w > 0` required.
    pub fn log_levy_density(&self, w: f64) -> f64 {
        (-1.0 - self.sigma) * w.ln() - self.tau * w - ln_gamma(1.0 - self.sigma)
    }

    /// Total mass `∫ ρ0` scaled by α: `α τ^σ / (-σ)` for `σ < 0`, infinite
    /// otherwise.
    pub fn total_mass(&self) -> TotalMass {
        if self.sigma < 0.0 {
            TotalMass::Finite(self.alpha * self.tau.powf(self.sigma) / (-self.sigma))
        } else {
            TotalMass::Infinite
        }
    }

    /// Truncated mass `α ∫_ε^∞ ρ0(dw)` — the expected number of retained
    /// atoms when sampling at level `ε`.
    pub fn truncated_mass(&self, epsilon: f64) -> Result<f64> {
        require_positive("epsilon", epsilon)?;
        Ok(self.alpha * self.levy_tail_integral(epsilon, |_| 1.0)?)
    }

    /// `α ∫_ε^∞ w ρ0(dw)` — expected total retained sociability.
    pub fn truncated_mean(&self, epsilon: f64) -> Result<f64> {
        require_positive("epsilon", epsilon)?;
        Ok(self.alpha * self.levy_tail_integral(epsilon, |w| w)?)
    }

    /// Mean sociability per unit α: `∫ w ρ0(dw) = τ^{σ-1}`.
    pub fn mean_sociability(&self) -> f64 {
        self.tau.powf(self.sigma - 1.0)
    }

    /// `∫_lo^∞ f(w) ρ0(dw)` (per unit α), for integrands bounded near `lo > 0`.
    fn levy_tail_integral<F: Fn(f64) -> f64>(&self, lo: f64, f: F) -> Result<f64> {
        let split = lo.max(1.0);
        let g = |w: f64| f(w) * self.levy_density(w);
        let mut total = 0.0;
        if lo < split {
            total += quadrature::integrate(g, lo, split, DEFAULT_REL_TOL, 1e-300)?.value;
        }
        total += quadrature::integrate_exp_tail(g, split, self.tau, DEFAULT_REL_TOL, 1e-300)?.value;
        Ok(total)
    }

    /// `∫_0^lim f(w) ρ0(dw)` (per unit α) for integrands with `f(w) = O(w)`
    /// at the origin, e.g. truncation-bias bounds. `lim = ∞` allowed via
    /// `f64::INFINITY`.
    pub(crate) fn levy_head_integral<F: Fn(f64) -> f64 + Copy>(
        &self,
        lim: f64,
        f: F,
    ) -> Result<f64> {
        // Effective singularity of f(w)·ρ0(w) is w^{-σ} when f ~ c·w.
        let g = |w: f64| f(w) * self.levy_density(w);
        let split = lim.min(1.0);
        let mut total =
            quadrature::integrate_power_singularity(g, split, self.sigma.max(0.0), DEFAULT_REL_TOL, 1e-300)?
                .value;
        if lim > 1.0 {
            if lim.is_infinite() {
                total += quadrature::integrate_exp_tail(g, 1.0, self.tau, DEFAULT_REL_TOL, 1e-300)?.value;
            } else {
                total += quadrature::integrate(g, 1.0, lim, DEFAULT_REL_TOL, 1e-300)?.value;
            }
        }
        Ok(total)
    }
}

/// Total mass of a Lévy measure: finite for finite-activity regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TotalMass {
    Finite(f64),
    Infinite,
}

impl TotalMass {
    pub fn finite(self) -> Option<f64> {
        match self {
            TotalMass::Finite(m) => Some(m),
            TotalMass::Infinite => None,
        }
    }
}

/// Community-score hyperparameters: `β_ik ~ Gamma(a_k, b_k)` in shape–rate
/// form (mean `a_k / b_k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcrmHyper {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl CcrmHyper {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::EmptyInput("community shape vector"));
        }
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                what: "community shape/rate vectors",
                expected: a.len(),
                got: b.len(),
            });
        }
        for &x in a.iter().chain(b.iter()) {
            require_positive("community shape/rate", x)?;
        }
        Ok(CcrmHyper { a, b })
    }

    /// Uniform scores across `p` communities.
    pub fn symmetric(p: usize, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a; p], vec![b; p])
    }

    /// Number of communities.
    pub fn p(&self) -> usize {
        self.a.len()
    }

    /// Mean score per community, `a_k / b_k`.
    pub fn mean_scores(&self) -> Vec<f64> {
        self.a.iter().zip(&self.b).map(|(a, b)| a / b).collect()
    }
}

// ---------------------------------------------------------------------------
// Atoms and sampling
// ---------------------------------------------------------------------------

/// One node of the latent point process: location, sociability, scores, and
/// the affiliation weights `w_k = w0 · β_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeAtom {
    pub theta: f64,
    pub w0: f64,
    pub beta: Vec<f64>,
    pub w: Vec<f64>,
}

impl NodeAtom {
    pub fn new(theta: f64, w0: f64, beta: Vec<f64>) -> Self {
        let w = beta.iter().map(|b| w0 * b).collect();
        NodeAtom { theta, w0, beta, w }
    }
}

/// Gamma(shape, rate) draw. `rand_distr` parameterizes by scale, so this
/// wrapper keeps the crate uniformly in shape–rate form.
pub fn gamma_rate<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    GammaDist::new(shape, 1.0 / rate)
        .expect("gamma parameters validated upstream")
        .sample(rng)
}

/// Poisson draw as an integer count.
pub fn poisson_count<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u64 {
    if rate == 0.0 {
        return 0;
    }
    Poisson::new(rate)
        .expect("poisson rate validated upstream")
        .sample(rng) as u64
}

/// Reusable GGP atom sampler. For `σ ≥ 0` construction tabulates the inverse
/// CDF of jumps above `ε` once, so replicate draws are cheap.
#[derive(Debug)]
pub struct GgpAtomSampler {
    hyper: GgpHyper,
    epsilon: f64,
    /// Expected atom count: α·∫ρ0 (σ<0) or α·M_ε (σ≥0).
    rate: f64,
    /// Tabulated jump grid / CDF for σ ≥ 0; `None` in the exact regime.
    table: Option<(Vec<f64>, Vec<f64>)>,
}

impl GgpAtomSampler {
    pub fn new(hyper: &GgpHyper, epsilon: f64) -> Result<Self> {
        require_positive("epsilon", epsilon)?;
        if let TotalMass::Finite(mass) = hyper.total_mass() {
            return Ok(GgpAtomSampler {
                hyper: *hyper,
                epsilon,
                rate: mass,
                table: None,
            });
        }

        // Infinite activity: tabulate the restriction to (ε, w_hi], where the
        // neglected tail beyond w_hi is below TAIL_NEGLECT relatively.
        let mass = hyper.truncated_mass(epsilon)? / hyper.alpha;
        let mut w_hi = epsilon.max(1.0);
        // For σ ≥ 0 the power factor is decreasing, so
        // ∫_w^∞ ρ0 ≤ ρ0(w)/τ — a usable doubling bound.
        while hyper.levy_density(w_hi) / hyper.tau > TAIL_NEGLECT * mass {
            w_hi *= 2.0;
        }
        let log_lo = epsilon.ln();
        let log_hi = w_hi.ln();
        let mut grid = Vec::with_capacity(CDF_GRID + 1);
        for i in 0..=CDF_GRID {
            let t = i as f64 / CDF_GRID as f64;
            grid.push((log_lo + t * (log_hi - log_lo)).exp());
        }
        let mut cdf = Vec::with_capacity(CDF_GRID + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for i in 0..CDF_GRID {
            acc += quadrature::integrate(
                |w| hyper.levy_density(w),
                grid[i],
                grid[i + 1],
                1e-10,
                1e-300,
            )?
            .value;
            cdf.push(acc);
        }
        let total = cdf[CDF_GRID];
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Ok(GgpAtomSampler {
            hyper: *hyper,
            epsilon,
            rate: hyper.alpha * mass,
            table: Some((grid, cdf)),
        })
    }

    /// Expected number of atoms per draw.
    pub fn expected_atoms(&self) -> f64 {
        self.rate
    }

    /// One jump size from the normalized jump distribution: `Gamma(-σ, τ)`
    /// in the exact regime, inverse-CDF on the tabulated restriction to
    /// `(ε, ∞)` otherwise.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.table {
            None => gamma_rate(rng, -self.hyper.sigma, self.hyper.tau),
            Some((grid, cdf)) => {
                let u: f64 = rng.random();
                let idx = cdf.partition_point(|c| *c < u).clamp(1, grid.len() - 1);
                let (c0, c1) = (cdf[idx - 1], cdf[idx]);
                let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                grid[idx - 1] + frac * (grid[idx] - grid[idx - 1])
            }
        }
    }

    /// Draws one realization of `(θ, w0)` pairs. Locations are uniform on
    /// `[0, α]`; order is the generation order, not θ-sorted.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(f64, f64)> {
        let k = poisson_count(rng, self.rate);
        let mut atoms = Vec::with_capacity(k as usize);
        for _ in 0..k {
            let theta = rng.random_range(0.0..self.hyper.alpha);
            atoms.push((theta, self.sample_jump(rng)));
        }
        atoms
    }

    /// Total β-weighted mass of one realization per community — used as the
    /// remainder-mass refresh in the graph sampler:
    /// `w_{*k} = Σ_m w0_m β_mk`, `β_mk ~ Gamma(a_k, b_k)`.
    pub fn sample_weighted_totals<R: Rng + ?Sized>(
        &self,
        ccrm: &CcrmHyper,
        rng: &mut R,
    ) -> Vec<f64> {
        let mut totals = vec![0.0; ccrm.p()];
        for (_, w0) in self.sample(rng) {
            for (k, t) in totals.iter_mut().enumerate() {
                *t += w0 * gamma_rate(rng, ccrm.a[k], ccrm.b[k]);
            }
        }
        totals
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// One-shot GGP draw: `(θ_i, w_i0)` pairs under truncation `epsilon`
/// (ignored in the exact `σ < 0` regime).
pub fn sample_ggp<R: Rng + ?Sized>(
    hyper: &GgpHyper,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    Ok(GgpAtomSampler::new(hyper, epsilon)?.sample(rng))
}

/// Decorates sociabilities with community scores, producing full atoms.
pub fn sample_scores<R: Rng + ?Sized>(
    sociabilities: &[(f64, f64)],
    ccrm: &CcrmHyper,
    rng: &mut R,
) -> Vec<NodeAtom> {
    sociabilities
        .iter()
        .map(|&(theta, w0)| {
            let beta: Vec<f64> = ccrm
                .a
                .iter()
                .zip(&ccrm.b)
                .map(|(&a, &b)| gamma_rate(rng, a, b))
                .collect();
            NodeAtom::new(theta, w0, beta)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Laplace exponent
// ---------------------------------------------------------------------------

/// `ψ(t)` per unit α (see module docs). Requires `t_k ≥ 0`; `ψ(0) = 0`.
pub fn laplace_exponent(t: &[f64], ggp: &GgpHyper, ccrm: &CcrmHyper) -> Result<f64> {
    if t.len() != ccrm.p() {
        return Err(Error::DimensionMismatch {
            what: "laplace exponent argument",
            expected: ccrm.p(),
            got: t.len(),
        });
    }
    for &tk in t {
        if !(tk.is_finite() && tk >= 0.0) {
            return Err(Error::invalid("t", tk, "must be finite and >= 0"));
        }
    }
    if t.iter().all(|&tk| tk == 0.0) {
        return Ok(0.0);
    }
    // 1 - Π_k (1 + t_k w0 / b_k)^{-a_k}, evaluated via expm1/ln_1p so small
    // arguments keep full precision and the integrand is exactly O(w0) at 0.
    let survival = |w0: f64| {
        let s: f64 = t
            .iter()
            .zip(ccrm.a.iter().zip(&ccrm.b))
            .map(|(&tk, (&ak, &bk))| ak * (tk * w0 / bk).ln_1p())
            .sum();
        -(-s).exp_m1()
    };
    let g = |w0: f64| survival(w0) * ggp.levy_density(w0);
    let head = quadrature::integrate_power_singularity(
        g,
        1.0,
        ggp.sigma.max(0.0),
        DEFAULT_REL_TOL,
        1e-300,
    )?;
    let tail = quadrature::integrate_exp_tail(g, 1.0, ggp.tau, DEFAULT_REL_TOL, 1e-300)?;
    Ok(head.value + tail.value)
}

/// Mean of the affiliation-weight measure per community and unit α:
/// `E_k = (a_k / b_k) · τ^{σ-1}`.
pub fn mean_measure(ggp: &GgpHyper, ccrm: &CcrmHyper) -> Vec<f64> {
    let m0 = ggp.mean_sociability();
    ccrm.mean_scores().iter().map(|m| m * m0).collect()
}

/// Laplace-exponent evaluator with a memo cache, plus the weight-measure
/// means. Quadrature nodes repeat across moment integrals, so caching exact
/// query points pays for itself; reads are concurrent, writes serialized.
#[derive(Debug)]
pub struct LevyMoments {
    pub ggp: GgpHyper,
    pub ccrm: CcrmHyper,
    cache: RwLock<HashMap<Vec<u64>, f64>>,
}

impl LevyMoments {
    pub fn new(ggp: GgpHyper, ccrm: CcrmHyper) -> Self {
        LevyMoments {
            ggp,
            ccrm,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Memoized `ψ(t)` per unit α.
    pub fn psi(&self, t: &[f64]) -> Result<f64> {
        let key: Vec<u64> = t.iter().map(|x| x.to_bits()).collect();
        if let Some(&v) = self.cache.read().expect("psi cache poisoned").get(&key) {
            return Ok(v);
        }
        let v = laplace_exponent(t, &self.ggp, &self.ccrm)?;
        self.cache.write().expect("psi cache poisoned").insert(key, v);
        Ok(v)
    }

    /// `ψ(t·1)` for a scalar argument broadcast across communities.
    pub fn psi_scalar(&self, t: f64) -> Result<f64> {
        self.psi(&vec![t; self.ccrm.p()])
    }

    /// Mean affiliation weight per community, per unit α.
    pub fn mean_w(&self) -> Vec<f64> {
        mean_measure(&self.ggp, &self.ccrm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};
    use approx::assert_relative_eq;

    fn ggp(alpha: f64, sigma: f64, tau: f64) -> GgpHyper {
        GgpHyper::new(alpha, sigma, tau).unwrap()
    }

    #[test]
    fn test_levy_density_known_value() {
        // σ = 0.5, τ = 1, w = 1: e^{-1}/Γ(1/2) = e^{-1}/√π.
        let h = ggp(1.0, 0.5, 1.0);
        assert_relative_eq!(h.levy_density(1.0), 0.207_553_748_710_297, max_relative = 1e-12);
        assert_eq!(h.levy_density(0.0), 0.0);
        assert_eq!(h.levy_density(-1.0), 0.0);
    }

    #[test]
    fn test_total_mass_closed_form_and_quadrature_agree() {
        // α τ^σ / (-σ) for σ < 0; cross-checked against direct integration.
        let h = ggp(3.0, -0.5, 2.0);
        let closed = h.total_mass().finite().unwrap();
        assert_relative_eq!(closed, 3.0 * 2.0f64.powf(-0.5) / 0.5, max_relative = 1e-14);
        let quad = h.alpha * h.levy_head_integral(f64::INFINITY, |_| 1.0).unwrap();
        assert_relative_eq!(closed, quad, max_relative = 1e-7);
        assert_eq!(ggp(1.0, 0.0, 1.0).total_mass(), TotalMass::Infinite);
        assert_eq!(ggp(1.0, 0.5, 1.0).total_mass(), TotalMass::Infinite);
    }

    #[test]
    fn test_mean_sociability_matches_quadrature() {
        for &sigma in &[-1.5, -0.5, 0.0, 0.3, 0.7] {
            let h = ggp(1.0, sigma, 1.7);
            let quad = h.levy_head_integral(f64::INFINITY, |w| w).unwrap();
            assert_relative_eq!(h.mean_sociability(), quad, max_relative = 1e-7);
        }
    }

    #[test]
    fn test_sample_ggp_finite_activity_moments() {
        // σ < 0: exact compound-Poisson sampler. Check E[#atoms] and E[Σ w0]
        // against closed forms within 3 standard errors.
        let h = ggp(3.0, -0.5, 1.0);
        let sampler = GgpAtomSampler::new(&h, DEFAULT_TRUNCATION).unwrap();
        let mut rng = stream(11, Domain::Atoms, 0);
        let reps = 4000;
        let (mut count_sum, mut mass_sum, mut mass_sq) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let atoms = sampler.sample(&mut rng);
            let m: f64 = atoms.iter().map(|(_, w)| w).sum();
            count_sum += atoms.len() as f64;
            mass_sum += m;
            mass_sq += m * m;
        }
        let n = reps as f64;
        let mean_count = count_sum / n;
        let expected_count = h.total_mass().finite().unwrap();
        // Poisson count: sd = sqrt(rate / n).
        let se_count = (expected_count / n).sqrt();
        assert!(
            (mean_count - expected_count).abs() < 3.0 * se_count,
            "atom count {mean_count} vs {expected_count} (3se = {})",
            3.0 * se_count
        );
        let mean_mass = mass_sum / n;
        let expected_mass = h.alpha * h.mean_sociability();
        let sd = ((mass_sq / n - mean_mass * mean_mass) / n).sqrt();
        assert!(
            (mean_mass - expected_mass).abs() < 3.0 * sd,
            "mass {mean_mass} vs {expected_mass} (3se = {})",
            3.0 * sd
        );
        // θ locations live on [0, α].
        let atoms = sampler.sample(&mut rng);
        assert!(atoms.iter().all(|&(t, _)| (0.0..=h.alpha).contains(&t)));
    }

    #[test]
    fn test_sample_ggp_truncated_moments() {
        // σ ≥ 0: truncated sampler. Compare against quadrature oracles for
        // the truncated mass and truncated mean.
        let h = ggp(2.0, 0.5, 1.0);
        let eps = 1e-3;
        let sampler = GgpAtomSampler::new(&h, eps).unwrap();
        let expected_count = h.truncated_mass(eps).unwrap();
        let expected_mass = h.truncated_mean(eps).unwrap();
        let mut rng = stream(12, Domain::Atoms, 0);
        let reps = 2000;
        let (mut count_sum, mut mass_sum, mut mass_sq) = (0.0, 0.0, 0.0);
        for _ in 0..reps {
            let atoms = sampler.sample(&mut rng);
            let m: f64 = atoms.iter().map(|(_, w)| w).sum();
            count_sum += atoms.len() as f64;
            mass_sum += m;
            mass_sq += m * m;
        }
        let n = reps as f64;
        let se_count = (expected_count / n).sqrt();
        assert!(
            (count_sum / n - expected_count).abs() < 3.0 * se_count,
            "count {} vs {expected_count}",
            count_sum / n
        );
        let mean_mass = mass_sum / n;
        let sd = ((mass_sq / n - mean_mass * mean_mass) / n).sqrt();
        assert!(
            (mean_mass - expected_mass).abs() < 3.0 * sd,
            "mass {mean_mass} vs {expected_mass} (3se = {})",
            3.0 * sd
        );
    }

    #[test]
    fn test_sample_scores_gamma_moments() {
        let ccrm = CcrmHyper::new(vec![2.0, 0.5], vec![1.0, 4.0]).unwrap();
        let soc: Vec<(f64, f64)> = (0..20000).map(|i| (i as f64, 1.0)).collect();
        let mut rng = stream(13, Domain::Atoms, 0);
        let atoms = sample_scores(&soc, &ccrm, &mut rng);
        for k in 0..2 {
            let mean: f64 =
                atoms.iter().map(|a| a.beta[k]).sum::<f64>() / atoms.len() as f64;
            let var_true = ccrm.a[k] / (ccrm.b[k] * ccrm.b[k]);
            let se = (var_true / atoms.len() as f64).sqrt();
            assert!(
                (mean - ccrm.a[k] / ccrm.b[k]).abs() < 3.0 * se,
                "score mean {mean} vs {}",
                ccrm.a[k] / ccrm.b[k]
            );
        }
        // w = w0 · β with w0 = 1 here.
        assert!(atoms.iter().all(|a| a.w == a.beta));
    }

    #[test]
    fn test_laplace_exponent_zero_and_frozen_value() {
        let ggp1 = ggp(1.0, 0.0, 1.0);
        let ccrm = CcrmHyper::symmetric(1, 1.0, 1.0).unwrap();
        assert_eq!(laplace_exponent(&[0.0], &ggp1, &ccrm).unwrap(), 0.0);
        // p=1, σ=0, τ=1, a=b=1, t=1:
        //   ψ(1) = ∫_0^∞ (1 - 1/(1+w)) w^{-1} e^{-w} dw = ∫_0^∞ e^{-w}/(1+w) dw
        //        = e·E1(1) = 0.596347362323194…
        let psi = laplace_exponent(&[1.0], &ggp1, &ccrm).unwrap();
        assert_relative_eq!(psi, 0.596_347_362_323_194, max_relative = 1e-8);
    }

    #[test]
    fn test_laplace_exponent_matches_monte_carlo_finite_activity() {
        // For σ < 0, ψ(t) = mass · E[1 - Π(1 + t W/b)^{-a}] with
        // W ~ Gamma(-σ, τ): an independent Monte Carlo oracle.
        let h = ggp(1.0, -0.7, 1.3);
        let ccrm = CcrmHyper::new(vec![1.5, 0.8], vec![2.0, 1.0]).unwrap();
        let t = [0.9, 2.4];
        let psi = laplace_exponent(&t, &h, &ccrm).unwrap();
        let mass = h.total_mass().finite().unwrap();
        let mut rng = stream(14, Domain::Atoms, 0);
        let n = 400_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let w = gamma_rate(&mut rng, 0.7, 1.3);
            let s: f64 = t
                .iter()
                .zip(ccrm.a.iter().zip(&ccrm.b))
                .map(|(&tk, (&ak, &bk))| ak * (tk * w / bk).ln_1p())
                .sum();
            let g = -(-s).exp_m1();
            sum += g;
            sq += g * g;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        let mc = mass * mean;
        assert!(
            (psi - mc).abs() < 3.0 * mass * se,
            "psi {psi} vs MC {mc} (3se = {})",
            3.0 * mass * se
        );
    }

    #[test]
    fn test_laplace_exponent_monotone_in_each_coordinate() {
        let h = ggp(1.0, 0.3, 0.8);
        let ccrm = CcrmHyper::new(vec![0.5, 1.2], vec![1.0, 3.0]).unwrap();
        let mut prev = 0.0;
        for i in 1..=20 {
            let t = i as f64 * 0.7;
            let v = laplace_exponent(&[t, 0.3 * t], &h, &ccrm).unwrap();
            assert!(v > prev, "psi must increase: {v} after {prev}");
            prev = v;
        }
    }

    #[test]
    fn test_mean_measure_matches_quadrature() {
        // α-free check of (a_k/b_k)·τ^{σ-1} against numerical integration of
        // E[β_k]·w against ρ0.
        let h = ggp(1.0, 0.4, 2.2);
        let ccrm = CcrmHyper::new(vec![0.08, 1.0], vec![0.5, 2.0]).unwrap();
        let means = mean_measure(&h, &ccrm);
        let m0 = h.levy_head_integral(f64::INFINITY, |w| w).unwrap();
        for k in 0..2 {
            assert_relative_eq!(means[k], ccrm.a[k] / ccrm.b[k] * m0, max_relative = 1e-7);
        }
    }

    #[test]
    fn test_levy_moments_cache_is_consistent() {
        let lm = LevyMoments::new(ggp(1.0, 0.2, 1.0), CcrmHyper::symmetric(2, 1.0, 1.0).unwrap());
        let a = lm.psi(&[0.5, 0.25]).unwrap();
        let b = lm.psi(&[0.5, 0.25]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_relative_eq!(
            lm.psi_scalar(0.5).unwrap(),
            lm.psi(&[0.5, 0.5]).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn test_hyper_validation() {
        assert!(GgpHyper::new(0.0, 0.5, 1.0).is_err());
        assert!(GgpHyper::new(1.0, 1.0, 1.0).is_err());
        assert!(GgpHyper::new(1.0, 0.5, 0.0).is_err());
        assert!(CcrmHyper::new(vec![], vec![]).is_err());
        assert!(CcrmHyper::new(vec![1.0], vec![1.0, 2.0]).is_err());
        assert!(CcrmHyper::new(vec![-1.0], vec![1.0]).is_err());
        assert!(laplace_exponent(&[1.0, 2.0], &ggp(1.0, 0.0, 1.0), &CcrmHyper::symmetric(1, 1.0, 1.0).unwrap()).is_err());
        assert!(laplace_exponent(&[-1.0], &ggp(1.0, 0.0, 1.0), &CcrmHyper::symmetric(1, 1.0, 1.0).unwrap()).is_err());
    }
}
