//! Adaptive one-dimensional quadrature.
//!
//! Globally adaptive Gauss–Kronrod (G7/K15): keep a worklist of segments
//! ordered by local error estimate `|K15 − G7|`, split the worst segment
//! until the summed error meets `max(abs_tol, rel_tol · |value|)`.
//!
//! Improper integrals are reduced to finite ones by two substitutions used
//! throughout the crate:
//!
//! - integrable power singularity at 0: `w = v^{1/(1-s)}` turns an
//!   `f(w) ~ w^{-s}` integrand (`s < 1`) into a bounded one;
//! - exponentially decaying tail: `w = a - ln(u)/tau` maps `(0,1] → [a,∞)`,
//!   so an `e^{-tau·w}` tail becomes a bounded integrand on `(0,1]`.
//!
//! Kronrod nodes are strictly interior, so endpoint singularities are never
//! evaluated.

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Default relative tolerance used by the model-level integrals.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Hard cap on segment subdivisions before reporting non-convergence.
const MAX_SEGMENTS: usize = 4096;

// 15-point Kronrod abscissae on [-1, 1] (non-negative half; symmetric).
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.0,
];

// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

// Embedded 7-point Gauss weights (odd-indexed Kronrod nodes).
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// Converged integral estimate.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Summed local error estimates (conservative).
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (lo, hi) = (f(mid - half * x), f(mid + half * x));
        // The center node (x = 0) must only be counted once.
        let pair = if x == 0.0 { lo } else { lo + hi };
        kronrod += wk * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    kronrod *= half;
    gauss *= half;
    Segment {
        a,
        b,
        value: kronrod,
        error: (kronrod - gauss).abs(),
    }
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
///
/// Converges when the summed error estimate is below
/// `max(abs_tol, rel_tol · |integral|)`; errors with
/// [`Error::QuadratureFailure`] otherwise.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let mut heap = BinaryHeap::new();
    let first = gk15(&f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut evaluations = 15;
    heap.push(first);

    while error > abs_tol.max(rel_tol * value.abs()) {
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::QuadratureFailure {
                context: "segment budget exhausted",
                estimate: error,
            });
        }
        let worst = heap.pop().expect("heap cannot be empty while error > 0");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval at floating-point resolution; cannot refine further.
            return Err(Error::QuadratureFailure {
                context: "interval underflow before reaching tolerance",
                estimate: error,
            });
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    if !value.is_finite() {
        return Err(Error::QuadratureFailure {
            context: "non-finite integrand",
            estimate: f64::INFINITY,
        });
    }
    Ok(QuadResult { value, abs_error: error, evaluations })
}

/// `∫_0^b f(w) dw` where `f(w) ~ c · w^{-s}` near 0 with `s < 1`.
///
/// Substitutes `w = v^{1/(1-s)}` so the transformed integrand is bounded at
/// the origin. For `s <= 0` the identity substitution is used.
pub fn integrate_power_singularity<F: Fn(f64) -> f64>(
    f: F,
    b: f64,
    s: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    assert!(s < 1.0, "power singularity exponent must be < 1");
    assert!(b > 0.0);
    if s <= 0.0 {
        return integrate(f, 0.0, b, rel_tol, abs_tol);
    }
    let p = 1.0 / (1.0 - s);
    let upper = b.powf(1.0 - s);
    integrate(
        |v| {
            let w = v.powf(p);
            f(w) * p * v.powf(p - 1.0)
        },
        0.0,
        upper,
        rel_tol,
        abs_tol,
    )
}

/// `∫_a^∞ f(w) dw` for an integrand with an `e^{-tau·w}` tail.
///
/// Substitutes `w = a - ln(u)/tau`, mapping `(0, 1] → [a, ∞)`.
pub fn integrate_exp_tail<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    tau: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    assert!(tau > 0.0, "tail decay rate must be positive");
    integrate(
        |u| {
            let w = a - u.ln() / tau;
            f(w) / (tau * u)
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const TOL: f64 = 1e-10;

    #[test]
    fn test_polynomial_is_exact() {
        let q = integrate(|x| x * x, 0.0, 1.0, 1e-12, 0.0).unwrap();
        assert_relative_eq!(q.value, 1.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn test_oscillatory_integrand() {
        let q = integrate(|x| (10.0 * x).sin(), 0.0, 1.0, 1e-12, 1e-15).unwrap();
        assert_relative_eq!(q.value, (1.0 - (10.0f64).cos()) / 10.0, max_relative = 1e-11);
    }

    #[test]
    fn test_reversed_and_degenerate_intervals() {
        let q = integrate(|x| x, 1.0, 1.0, 1e-12, 0.0).unwrap();
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn test_power_singularity_half() {
        // ∫_0^1 x^{-1/2} dx = 2
        let q = integrate_power_singularity(|x| x.powf(-0.5), 1.0, 0.5, TOL, 0.0).unwrap();
        assert_relative_eq!(q.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn test_power_singularity_strong() {
        // ∫_0^2 x^{-0.9} dx = 2^{0.1}/0.1
        let q = integrate_power_singularity(|x| x.powf(-0.9), 2.0, 0.9, TOL, 0.0).unwrap();
        assert_relative_eq!(q.value, 2.0f64.powf(0.1) / 0.1, max_relative = 1e-9);
    }

    #[test]
    fn test_exp_tail_plain() {
        // ∫_1^∞ e^{-2x} dx = e^{-2}/2
        let q = integrate_exp_tail(|x| (-2.0 * x).exp(), 1.0, 2.0, TOL, 0.0).unwrap();
        assert_relative_eq!(q.value, (-2.0f64).exp() / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn test_exp_tail_with_polynomial_factor() {
        // ∫_1^∞ x e^{-x} dx = 2/e
        let q = integrate_exp_tail(|x| x * (-x).exp(), 1.0, 1.0, TOL, 0.0).unwrap();
        assert_relative_eq!(q.value, 2.0 / std::f64::consts::E, max_relative = 1e-9);
    }

    #[test]
    fn test_gamma_function_by_head_tail_split() {
        // Γ(1/2) = √π assembled from the two substitutions.
        let head = integrate_power_singularity(|x| x.powf(-0.5) * (-x).exp(), 1.0, 0.5, TOL, 0.0)
            .unwrap();
        let tail = integrate_exp_tail(|x| x.powf(-0.5) * (-x).exp(), 1.0, 1.0, TOL, 0.0).unwrap();
        assert_relative_eq!(
            head.value + tail.value,
            std::f64::consts::PI.sqrt(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn test_error_estimate_is_honest() {
        let q = integrate(|x| (-x * x).exp(), 0.0, 3.0, 1e-10, 0.0).unwrap();
        let truth = 0.886_207_348_259_521_3; // (√π/2)·erf(3)
        assert!((q.value - truth).abs() <= q.abs_error.max(1e-12));
    }

    #[test]
    fn test_nonfinite_integrand_is_rejected() {
        // Non-integrable pole: must error rather than return a number.
        let r = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-10, 0.0);
        assert!(r.is_err());
    }
}
