use serde::{Deserialize, Serialize};

use super::line_search::{adaptive_step_update, armijo_backtrack, ArmijoConfig};
use super::trace::{Clock, SolverTrace, TraceRow};
use super::{SolveError, SolverOutcome, StopReason, Stopping};
use crate::error::Error;
use crate::manifold::{first_order, Geometry, Objective, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdConfig {
    pub max_iters: usize,
    pub stop: Stopping,
    pub armijo: ArmijoConfig,
    /// First trial step `ŝ₀`.
    pub initial_step: f64,
    /// Record wall time in the trace; off gives bit-reproducible traces.
    pub record_time: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        GdConfig { max_iters: 200, stop: Stopping::default(), armijo: ArmijoConfig::default(), initial_step: 1.0, record_time: true }
    }
}

/// Steepest descent with Armijo backtracking and the adaptive initial step.
pub fn gradient_descent<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x0: G::Point,
    cfg: &GdConfig,
) -> Result<SolverOutcome<G::Point>, SolveError> {
    let clock = Clock::new(cfg.record_time);
    let mut trace = SolverTrace::default();
    let fail = |error: Error, trace: SolverTrace| SolveError { error, trace };
    if let Err(e) = cfg.armijo.validate() {
        return Err(fail(e, trace));
    }
    if !(cfg.initial_step > 0.0 && cfg.initial_step.is_finite()) {
        return Err(fail(Error::Config(format!("initial step {} must be positive", cfg.initial_step)), trace));
    }

    let mut x = x0;
    let mut s_hat = cfg.initial_step;
    let mut fo = first_order(geom, obj, &x);
    trace.rows.push(TraceRow {
        iter: 0,
        cost: fo.cost,
        grad_norm: fo.grad_norm,
        step_or_radius: 0.0,
        backtracks: 0,
        inner_iters: 0,
        rho: f64::NAN,
        time_s: clock.elapsed(),
    });
    for iter in 1..=cfg.max_iters {
        if !fo.cost.is_finite() || !fo.grad_norm.is_finite() {
            return Err(fail(Error::NonFinite(format!("cost or gradient at iteration {}", iter - 1)), trace));
        }
        if let Some(stop) = cfg.stop.check(fo.cost, fo.grad_norm) {
            return Ok(SolverOutcome { point: x, trace, stop });
        }
        let dir = fo.grad.scaled(-1.0);
        let step = match armijo_backtrack(geom, obj, &x, fo.cost, &fo.grad, &dir, s_hat, &cfg.armijo) {
            Ok(s) => s,
            Err(e) => return Err(fail(e, trace)),
        };
        s_hat = adaptive_step_update(s_hat, step.step, step.backtracks).expect("accepted steps are positive");
        x = step.point;
        fo = first_order(geom, obj, &x);
        trace.rows.push(TraceRow {
            iter,
            cost: fo.cost,
            grad_norm: fo.grad_norm,
            step_or_radius: step.step,
            backtracks: step.backtracks,
            inner_iters: 0,
            rho: f64::NAN,
            time_s: clock.elapsed(),
        });
    }
    let stop = cfg.stop.check(fo.cost, fo.grad_norm).unwrap_or(StopReason::MaxIterations);
    Ok(SolverOutcome { point: x, trace, stop })
}
