//! Armijo backtracking and the adaptive initial step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{Geometry, Objective, TangentVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmijoConfig {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Contraction factor.
    pub rho: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        ArmijoConfig { c1: 1e-4, rho: 0.5, max_backtracks: 50 }
    }
}

impl ArmijoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1 < 1.0) {
            return Err(Error::Config(format!("armijo c1 = {} must lie in (0, 1)", self.c1)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("armijo rho = {} must lie in (0, 1)", self.rho)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ArmijoStep<P> {
    pub step: f64,
    pub backtracks: usize,
    pub point: P,
    pub cost: f64,
}

/// Largest `s = ŝ ρʲ` with `φ(R_x(s·dir)) ≤ φ(x) + c₁ s g(grad, dir)`.
///
/// A retraction that loses rank, or a non-finite trial cost, counts as one
/// more contraction.
#[allow(clippy::too_many_arguments)]
pub fn armijo_backtrack<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x: &G::Point,
    cost: f64,
    grad: &G::Vector,
    dir: &G::Vector,
    s_hat: f64,
    cfg: &ArmijoConfig,
) -> Result<ArmijoStep<G::Point>> {
    let slope = geom.metric(x, grad, dir);
    if !(slope < 0.0) {
        return Err(Error::NotDescent { slope });
    }
    if !(s_hat > 0.0 && s_hat.is_finite()) {
        return Err(Error::Config(format!("initial step {s_hat} must be positive")));
    }
    let mut s = s_hat;
    for j in 0..=cfg.max_backtracks {
        match geom.retract(x, &dir.scaled(s)) {
            Ok(point) => {
                let c = obj.cost(&point);
                if c.is_finite() && c <= cost + cfg.c1 * s * slope {
                    return Ok(ArmijoStep { step: s, backtracks: j, point, cost: c });
                }
            }
            Err(Error::RankDrop { .. }) => {}
            Err(e) => return Err(e),
        }
        s *= cfg.rho;
    }
    Err(Error::LineSearch { backtracks: cfg.max_backtracks })
}

/// Next initial step guess: `2ŝ` if the last search accepted `ŝ` outright,
/// `2s` otherwise.
pub fn adaptive_step_update(s_hat: f64, s: f64, backtracks: usize) -> Result<f64> {
    if !(s_hat > 0.0 && s > 0.0) {
        return Err(Error::Config(format!("step sizes must be positive (ŝ = {s_hat}, s = {s})")));
    }
    Ok(if backtracks == 0 { 2.0 * s_hat } else { 2.0 * s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Euclidean;
    use nalgebra::DMatrix;

    /// `φ(x) = (x − 3)² / 2` on the real line.
    struct Parabola;

    impl Objective<Euclidean> for Parabola {
        type State = ();
        fn cost(&self, x: &DMatrix<f64>) -> f64 {
            0.5 * (x[(0, 0)] - 3.0).powi(2)
        }
        fn prepare(&self, x: &DMatrix<f64>) -> (f64, ()) {
            (self.cost(x), ())
        }
        fn partials(&self, x: &DMatrix<f64>, _s: &()) -> DMatrix<f64> {
            x.add_scalar(-3.0)
        }
        fn directional_partials(&self, _x: &DMatrix<f64>, _s: &(), xi: &DMatrix<f64>) -> DMatrix<f64> {
            xi.clone()
        }
    }

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn adaptive_rule_examples() {
        assert_eq!(adaptive_step_update(1.0, 1.0, 0).unwrap(), 2.0);
        assert_eq!(adaptive_step_update(1.0, 0.5, 1).unwrap(), 1.0);
        assert_eq!(adaptive_step_update(1.0, 0.25, 3).unwrap(), 0.5);
        assert!(adaptive_step_update(0.0, 1.0, 0).is_err());
        assert!(adaptive_step_update(1.0, -1.0, 1).is_err());
    }

    #[test]
    fn exact_minimizing_step_is_accepted_at_once() {
        let x = scalar(0.0);
        let grad = scalar(-3.0);
        let dir = scalar(3.0);
        let out = armijo_backtrack(&Euclidean, &Parabola, &x, 4.5, &grad, &dir, 1.0, &ArmijoConfig::default()).unwrap();
        assert_eq!(out.backtracks, 0);
        assert_eq!(out.step, 1.0);
        assert_eq!(out.cost, 0.0);
    }

    #[test]
    fn overshooting_step_backtracks_until_armijo_holds() {
        let cfg = ArmijoConfig::default();
        let x = scalar(0.0);
        let grad = scalar(-3.0);
        let dir = scalar(3.0);
        let out = armijo_backtrack(&Euclidean, &Parabola, &x, 4.5, &grad, &dir, 4.0, &cfg).unwrap();
        assert!(out.backtracks >= 1);
        // scalar oracle: φ(3s) = 4.5 (1 − s)², slope −9
        let s = out.step;
        assert_eq!(out.cost, 4.5 * (1.0 - s).powi(2));
        assert!(out.cost <= 4.5 - cfg.c1 * s * 9.0);
        // the previous trial violated the condition
        let prev = s / cfg.rho;
        assert!(4.5 * (1.0 - prev).powi(2) > 4.5 - cfg.c1 * prev * 9.0);
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let x = scalar(0.0);
        let grad = scalar(-3.0);
        let r = armijo_backtrack(&Euclidean, &Parabola, &x, 4.5, &grad, &scalar(-1.0), 1.0, &ArmijoConfig::default());
        assert!(matches!(r, Err(Error::NotDescent { .. })));
    }

    #[test]
    fn exhausted_backtracks_fail() {
        let cfg = ArmijoConfig { max_backtracks: 2, ..Default::default() };
        let x = scalar(0.0);
        let r = armijo_backtrack(&Euclidean, &Parabola, &x, 4.5, &scalar(-3.0), &scalar(3.0), 1e6, &cfg);
        assert!(matches!(r, Err(Error::LineSearch { backtracks: 2 })));
    }
}
