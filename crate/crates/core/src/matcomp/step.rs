//! Initial step size and trust-region radii from the linearized cost.

use super::{CompletionModel, CompletionProblem};
use crate::error::{Error, Result};
use crate::linalg::{minimize_polynomial, pairwise_sum};
use crate::manifold::TangentVector;

/// Floor on the linearized step.
pub const MIN_STEP: f64 = 1e-16;

/// Coefficients of `s ↦ (1/|Ω|) ‖P_Ω(W(x + s ξ)) − P_Ω(W★)‖²` along the
/// straight line in the total space.
pub(crate) fn line_polynomial<G: CompletionModel>(problem: &CompletionProblem, x: &G::Point, dir: &G::Vector) -> Vec<f64> {
    let pattern = problem.train().pattern();
    let mut c = G::line_coefficients(x, dir, pattern);
    for (r, w) in c[0].iter_mut().zip(problem.train().values()) {
        *r -= w;
    }
    let m = c.len();
    let inv = 1.0 / problem.train().nnz() as f64;
    let mut poly = vec![0.0; 2 * m - 1];
    let mut prod = vec![0.0; pattern.nnz()];
    for a in 0..m {
        for b in a..m {
            for ((p, x), y) in prod.iter_mut().zip(&c[a]).zip(&c[b]) {
                *p = x * y;
            }
            let weight = if a == b { 1.0 } else { 2.0 };
            poly[a + b] += weight * inv * pairwise_sum(&prod);
        }
    }
    poly
}

/// Minimizer `s₀ > 0` of the cost along `x + s·dir`, linearized in the total
/// space. `dir` is the search direction itself, e.g. `−grad`.
pub fn linearized_step<G: CompletionModel>(_geom: &G, problem: &CompletionProblem, x: &G::Point, dir: &G::Vector) -> Result<f64> {
    let amax = dir.max_abs();
    if amax.is_nan() {
        return Err(Error::NonFinite("search direction".into()));
    }
    if amax == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let poly = line_polynomial::<G>(problem, x, dir);
    let (s, _) = minimize_polynomial(&poly)?;
    Ok(s.max(MIN_STEP))
}

/// Initial and maximal trust-region radii `(Δ₀, Δ̄)` from the linearized step
/// along `−grad` and the gradient norm.
pub fn tr_radius_seed(s0: f64, grad_norm: f64) -> Result<(f64, f64)> {
    if !(grad_norm > 0.0) {
        return Err(Error::ZeroGradient);
    }
    if !(s0.is_finite() && grad_norm.is_finite()) {
        return Err(Error::NonFinite("radius seed".into()));
    }
    let delta0 = s0 / 64.0 * grad_norm;
    Ok((delta0, 1024.0 * delta0))
}
