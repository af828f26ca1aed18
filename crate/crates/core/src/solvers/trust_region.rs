use serde::{Deserialize, Serialize};

use super::trace::{Clock, SolverTrace, TraceRow};
use super::{SolveError, SolverOutcome, StopReason, Stopping};
use crate::error::{Error, Result};
use crate::manifold::{first_order, hessian_vector, Geometry, Objective, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrConfig {
    pub max_outer: usize,
    pub max_inner: usize,
    pub theta: f64,
    pub kappa: f64,
    pub delta0: f64,
    pub delta_max: f64,
    /// Steps with `ρ` above this are accepted.
    pub accept_ratio: f64,
    /// The radius shrinks when `ρ` falls below this.
    pub shrink_ratio: f64,
    /// The radius grows when `ρ` exceeds this and the step reached the boundary.
    pub grow_ratio: f64,
    pub shrink_factor: f64,
    pub grow_factor: f64,
    /// Added to both sides of `ρ`, relative to `|φ(x)|`.
    pub rho_regularization: f64,
    pub stop: Stopping,
    pub record_time: bool,
}

impl Default for TrConfig {
    fn default() -> Self {
        TrConfig {
            max_outer: 100,
            max_inner: 100,
            theta: 1.0,
            kappa: 0.1,
            delta0: 1.0,
            delta_max: 1024.0,
            accept_ratio: 0.1,
            shrink_ratio: 0.1,
            grow_ratio: 0.75,
            shrink_factor: 4.0,
            grow_factor: 2.0,
            rho_regularization: 1e-15,
            stop: Stopping::default(),
            record_time: true,
        }
    }
}

impl TrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("kappa = {} must lie in (0, 1)", self.kappa)));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config(format!("theta = {} must be positive", self.theta)));
        }
        if !(self.delta0 > 0.0 && self.delta0 <= self.delta_max && self.delta_max.is_finite()) {
            return Err(Error::Config(format!("need 0 < Δ₀ = {} ≤ Δ̄ = {}", self.delta0, self.delta_max)));
        }
        if !(self.shrink_factor > 1.0 && self.grow_factor > 1.0) {
            return Err(Error::Config("radius factors must exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TcgStatus {
    Converged,
    Boundary,
    NegativeCurvature,
    MaxInner,
}

#[derive(Debug, Clone)]
pub struct TcgResult<V> {
    pub eta: V,
    /// `Hess[η]`, tracked through the iteration.
    pub h_eta: V,
    pub status: TcgStatus,
    pub inner_iters: usize,
}

/// Inner stopping threshold `‖r₀‖ min(‖r₀‖^θ, κ)`.
pub fn tcg_threshold(r0_norm: f64, theta: f64, kappa: f64) -> f64 {
    r0_norm * r0_norm.powf(theta).min(kappa)
}

/// `τ ≥ 0` with `‖η + τδ‖ = Δ`.
fn to_boundary(eta_eta: f64, eta_delta: f64, delta_delta: f64, radius: f64) -> f64 {
    let disc = eta_delta * eta_delta + delta_delta * (radius * radius - eta_eta);
    (-eta_delta + disc.max(0.0).sqrt()) / delta_delta
}

/// Steihaug–Toint truncated conjugate gradient for
/// `min_η ⟨grad, η⟩ + ½⟨Hess η, η⟩` subject to `‖η‖ ≤ Δ`.
#[allow(clippy::too_many_arguments)]
pub fn truncated_cg<V: TangentVector>(
    inner: impl Fn(&V, &V) -> f64,
    mut hess: impl FnMut(&V) -> Result<V>,
    grad: &V,
    radius: f64,
    theta: f64,
    kappa: f64,
    max_inner: usize,
) -> Result<TcgResult<V>> {
    let mut eta = grad.zeros_like();
    let mut h_eta = grad.zeros_like();
    let mut r = grad.clone();
    let mut rr = inner(&r, &r);
    let stop = tcg_threshold(rr.sqrt(), theta, kappa);
    let mut delta = grad.scaled(-1.0);
    let mut eta_eta = 0.0;
    let mut eta_delta = 0.0;
    let mut delta_delta = rr;
    for j in 1..=max_inner {
        let h_delta = hess(&delta)?;
        let curvature = inner(&delta, &h_delta);
        let alpha = rr / curvature;
        let next_norm2 = eta_eta + 2.0 * alpha * eta_delta + alpha * alpha * delta_delta;
        if curvature <= 0.0 || next_norm2 >= radius * radius {
            let tau = to_boundary(eta_eta, eta_delta, delta_delta, radius);
            eta.axpy(tau, &delta);
            h_eta.axpy(tau, &h_delta);
            let status = if curvature <= 0.0 { TcgStatus::NegativeCurvature } else { TcgStatus::Boundary };
            return Ok(TcgResult { eta, h_eta, status, inner_iters: j });
        }
        eta.axpy(alpha, &delta);
        h_eta.axpy(alpha, &h_delta);
        r.axpy(alpha, &h_delta);
        let rr_next = inner(&r, &r);
        if rr_next.sqrt() <= stop {
            return Ok(TcgResult { eta, h_eta, status: TcgStatus::Converged, inner_iters: j });
        }
        let beta = rr_next / rr;
        rr = rr_next;
        delta.scale_mut(beta);
        delta.axpy(-1.0, &r);
        // norms for the boundary test, updated without extra inner products on η
        eta_eta = next_norm2;
        eta_delta = beta * (eta_delta + alpha * delta_delta);
        delta_delta = rr + beta * beta * delta_delta;
    }
    Ok(TcgResult { eta, h_eta, status: TcgStatus::MaxInner, inner_iters: max_inner })
}

/// Riemannian trust-region with truncated CG.
pub fn trust_region<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x0: G::Point,
    cfg: &TrConfig,
) -> std::result::Result<SolverOutcome<G::Point>, SolveError> {
    let clock = Clock::new(cfg.record_time);
    let mut trace = SolverTrace::default();
    let fail = |error: Error, trace: SolverTrace| SolveError { error, trace };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, trace));
    }
    let mut x = x0;
    let mut radius = cfg.delta0;
    let mut fo = first_order(geom, obj, &x);
    trace.rows.push(TraceRow {
        iter: 0,
        cost: fo.cost,
        grad_norm: fo.grad_norm,
        step_or_radius: radius,
        backtracks: 0,
        inner_iters: 0,
        rho: f64::NAN,
        time_s: clock.elapsed(),
    });
    for iter in 1..=cfg.max_outer {
        if !fo.cost.is_finite() || !fo.grad_norm.is_finite() {
            return Err(fail(Error::NonFinite(format!("cost or gradient at iteration {}", iter - 1)), trace));
        }
        if let Some(stop) = cfg.stop.check(fo.cost, fo.grad_norm) {
            return Ok(SolverOutcome { point: x, trace, stop });
        }
        let tcg = truncated_cg(
            |a, b| geom.metric(&x, a, b),
            |v| hessian_vector(geom, obj, &x, &fo, v),
            &fo.grad,
            radius,
            cfg.theta,
            cfg.kappa,
            cfg.max_inner,
        );
        let tcg = match tcg {
            Ok(t) => t,
            Err(e) => return Err(fail(e, trace)),
        };
        let model_decrease =
            -(geom.metric(&x, &fo.grad, &tcg.eta) + 0.5 * geom.metric(&x, &tcg.h_eta, &tcg.eta));
        let candidate = match geom.retract(&x, &tcg.eta) {
            Ok(p) => Some(p),
            Err(Error::RankDrop { .. }) => None,
            Err(e) => return Err(fail(e, trace)),
        };
        let (rho, new_cost) = match &candidate {
            Some(p) => {
                let c = obj.cost(p);
                let reg = cfg.rho_regularization * fo.cost.abs();
                let rho = ((fo.cost - c) + reg) / (model_decrease + reg);
                (if c.is_finite() { rho } else { f64::NEG_INFINITY }, c)
            }
            None => (f64::NEG_INFINITY, f64::NAN),
        };
        let hit_boundary = matches!(tcg.status, TcgStatus::Boundary | TcgStatus::NegativeCurvature);
        if rho < cfg.shrink_ratio {
            radius /= cfg.shrink_factor;
        } else if rho > cfg.grow_ratio && hit_boundary {
            radius = (cfg.grow_factor * radius).min(cfg.delta_max);
        }
        if rho > cfg.accept_ratio && model_decrease > 0.0 && new_cost <= fo.cost {
            x = candidate.expect("accepted steps have a point");
            fo = first_order(geom, obj, &x);
        }
        trace.rows.push(TraceRow {
            iter,
            cost: fo.cost,
            grad_norm: fo.grad_norm,
            step_or_radius: radius,
            backtracks: 0,
            inner_iters: tcg.inner_iters,
            rho,
            time_s: clock.elapsed(),
        });
    }
    let stop = cfg.stop.check(fo.cost, fo.grad_norm).unwrap_or(StopReason::MaxIterations);
    Ok(SolverOutcome { point: x, trace, stop })
}
