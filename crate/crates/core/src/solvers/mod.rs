//! Geometry-agnostic Riemannian gradient descent and trust-region.

mod gd;
mod line_search;
mod trace;
mod trust_region;

pub use gd::{gradient_descent, GdConfig};
pub use line_search::{adaptive_step_update, armijo_backtrack, ArmijoConfig, ArmijoStep};
pub use trace::{SolverTrace, TraceRow, CSV_HEADER};
pub use trust_region::{tcg_threshold, trust_region, truncated_cg, TcgResult, TcgStatus, TrConfig};

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    CostTolerance,
    GradientTolerance,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SolverOutcome<P> {
    pub point: P,
    pub trace: SolverTrace,
    pub stop: StopReason,
}

/// A solver failure together with the iterations completed before it.
#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} iterations)", trace.iterations())]
pub struct SolveError {
    pub error: Error,
    pub trace: SolverTrace,
}

/// Stopping tests shared by both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stopping {
    pub cost: f64,
    pub grad_norm: f64,
}

impl Default for Stopping {
    fn default() -> Self {
        Stopping { cost: 1e-20, grad_norm: 1e-12 }
    }
}

impl Stopping {
    fn check(&self, cost: f64, grad_norm: f64) -> Option<StopReason> {
        if cost <= self.cost {
            Some(StopReason::CostTolerance)
        } else if grad_norm <= self.grad_norm {
            Some(StopReason::GradientTolerance)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gd,
    Tr,
}

impl SolverKind {
    pub const ALL: [SolverKind; 2] = [SolverKind::Gd, SolverKind::Tr];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Gd => "gd",
            SolverKind::Tr => "tr",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown solver `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Euclidean;
    use crate::manifold::Objective;
    use nalgebra::DMatrix;

    /// `φ(X) = ½ Σ w_ij (X_ij − A_ij)²` with weights spread over one decade.
    struct Weighted {
        a: DMatrix<f64>,
        w: DMatrix<f64>,
    }

    impl Objective<Euclidean> for Weighted {
        type State = DMatrix<f64>;
        fn cost(&self, x: &DMatrix<f64>) -> f64 {
            0.5 * (x - &self.a).component_mul(&(x - &self.a)).component_mul(&self.w).sum()
        }
        fn prepare(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
            (self.cost(x), (x - &self.a).component_mul(&self.w))
        }
        fn partials(&self, _x: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
            s.clone()
        }
        fn directional_partials(&self, _x: &DMatrix<f64>, _s: &DMatrix<f64>, xi: &DMatrix<f64>) -> DMatrix<f64> {
            xi.component_mul(&self.w)
        }
    }

    fn toy() -> Weighted {
        let mut g = crate::rng::stream(1, 0);
        let a = crate::rng::gaussian(&mut g, 3, 2);
        let w = DMatrix::from_fn(3, 2, |i, j| 10f64.powf((i + 3 * j) as f64 / 5.0));
        Weighted { a, w }
    }

    #[test]
    fn zero_gradient_start_returns_immediately() {
        let obj = toy();
        let out = gradient_descent(&Euclidean, &obj, obj.a.clone(), &GdConfig::default()).unwrap();
        assert_eq!(out.trace.iterations(), 0);
        assert_eq!(out.stop, StopReason::CostTolerance);
        let out = trust_region(&Euclidean, &obj, obj.a.clone(), &TrConfig::default()).unwrap();
        assert_eq!(out.trace.iterations(), 0);
    }

    #[test]
    fn gradient_descent_decreases_monotonically() {
        let obj = toy();
        let cfg = GdConfig { max_iters: 2000, record_time: false, ..Default::default() };
        let out = gradient_descent(&Euclidean, &obj, DMatrix::zeros(3, 2), &cfg).unwrap();
        let costs: Vec<f64> = out.trace.rows.iter().map(|r| r.cost).collect();
        assert!(costs.windows(2).all(|w| w[1] < w[0]), "{costs:?}");
        assert!(out.trace.rows.iter().all(|r| r.time_s == 0.0));
        assert_ne!(out.stop, StopReason::MaxIterations);
        // ŝ chain: the trace step never exceeds twice the previous one
        for w in out.trace.rows[1..].windows(2) {
            assert!(w[1].step_or_radius <= 4.0 * w[0].step_or_radius + 1e-300);
        }
    }

    #[test]
    fn trust_region_converges_on_a_quadratic() {
        let obj = toy();
        let cfg = TrConfig { delta0: 0.1, delta_max: 100.0, record_time: false, ..Default::default() };
        let out = trust_region(&Euclidean, &obj, DMatrix::zeros(3, 2), &cfg).unwrap();
        assert_ne!(out.stop, StopReason::MaxIterations, "{:?}", out.trace.last());
        let costs: Vec<f64> = out.trace.rows.iter().map(|r| r.cost).collect();
        assert!(costs.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.trace.iterations() < 40);
    }

    #[test]
    fn solver_kinds_parse() {
        for k in SolverKind::ALL {
            assert_eq!(k.as_str().parse::<SolverKind>().unwrap(), k);
        }
        assert!("newton".parse::<SolverKind>().is_err());
    }
}
