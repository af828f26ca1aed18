//! Numerical checks of a geometry and a cost: Taylor remainders for the
//! gradient and Hessian, projection algebra, metric duality, and invariance
//! along the fibers.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::manifold::{first_order, hessian_vector, Geometry, Objective, TangentVector};
use crate::rng::{self, Rng};

/// Step sizes for the Taylor tests: 6 points, log-spaced over `[1e-6, 1e-2]`.
pub fn taylor_steps() -> Vec<f64> {
    (0..6).map(|k| 10f64.powf(-6.0 + 0.8 * k as f64)).collect()
}

const FLOOR: f64 = 1e-14;
const MAX_DROPPED: usize = 2;

/// One Taylor-remainder test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaylorCheck {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log residual` against `log t`; `None` when
    /// every residual is at the rounding floor.
    pub slope: Option<f64>,
    /// Points that entered the fit.
    pub fitted: usize,
    pub passed: bool,
    pub failure: Option<String>,
}

impl TaylorCheck {
    fn failed(msg: String) -> Self {
        TaylorCheck { steps: vec![], residuals: vec![], slope: None, fitted: 0, passed: false, failure: Some(msg) }
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Evaluates `|cost(t) − model(t)|` over [`taylor_steps`] and fits the slope.
///
/// Up to two of the smallest steps are discarded while their residual sits
/// below `1e-14·max(|φ(x)|, |φ(R(tξ))|)`.
fn taylor_fit(
    phi0: f64,
    cost: impl Fn(f64) -> Result<f64>,
    model: impl Fn(f64) -> f64,
    accept: impl Fn(f64) -> bool,
) -> TaylorCheck {
    let steps = taylor_steps();
    let mut residuals = Vec::with_capacity(steps.len());
    let mut floors = Vec::with_capacity(steps.len());
    for &t in &steps {
        let c = match cost(t) {
            Ok(c) => c,
            Err(e) => return TaylorCheck::failed(format!("t = {t:e}: {e}")),
        };
        if !c.is_finite() {
            return TaylorCheck::failed(format!("non-finite cost at t = {t:e}"));
        }
        residuals.push((c - model(t)).abs());
        floors.push(FLOOR * phi0.abs().max(c.abs()));
    }
    if residuals.iter().zip(&floors).all(|(r, f)| r <= f) {
        return TaylorCheck { steps, residuals, slope: None, fitted: 0, passed: true, failure: None };
    }
    let mut start = 0;
    while start < MAX_DROPPED && residuals[start] <= floors[start] {
        start += 1;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = steps[start..]
        .iter()
        .zip(&residuals[start..])
        .filter(|(_, r)| **r > 0.0)
        .map(|(t, r)| (t.log10(), r.log10()))
        .unzip();
    if lx.len() < 2 {
        return TaylorCheck { steps, residuals, slope: None, fitted: lx.len(), passed: false, failure: Some("too few points above the rounding floor".into()) };
    }
    let slope = fit_slope(&lx, &ly);
    TaylorCheck { steps, residuals, slope: Some(slope), fitted: lx.len(), passed: accept(slope), failure: None }
}

/// Rescales `xi` so that the first-order change of `W` has the size of `W`.
///
/// A metric-unit direction can be a tiny relative perturbation (the embedded
/// metric is the Frobenius norm of `W`), leaving the small-t residuals below
/// the rounding of the retraction. Forms dense `d1 × d2` matrices.
fn relative_unit<G: Geometry>(geom: &G, x: &G::Point, xi: G::Vector) -> G::Vector {
    let dw = geom.differential_dense(x, &xi).norm();
    let w = geom.to_dense(x).norm();
    if dw > 0.0 && w > 0.0 {
        xi.scaled(w / dw)
    } else {
        let n = geom.norm(x, &xi);
        if n > 0.0 { xi.scaled(1.0 / n) } else { xi }
    }
}

/// Taylor test of a claimed gradient `grad` along `xi`:
/// `|φ(R(tξ)) − φ(x) − t g(grad, ξ)| = O(t²)`.
pub fn gradient_taylor<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x: &G::Point,
    xi: &G::Vector,
    grad: &G::Vector,
) -> TaylorCheck {
    let phi0 = obj.cost(x);
    let slope = geom.metric(x, grad, xi);
    taylor_fit(
        phi0,
        |t| Ok(obj.cost(&geom.retract(x, &xi.scaled(t))?)),
        |t| phi0 + t * slope,
        |s| (1.9..=2.1).contains(&s),
    )
}

/// Taylor test of a claimed Hessian action `hxi = Hess φ(x)[ξ]`:
/// `|φ(R(tξ)) − φ(x) − t g(grad, ξ) − t²/2 g(Hξ, ξ)| = O(t³)`.
pub fn hessian_taylor<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x: &G::Point,
    xi: &G::Vector,
    grad: &G::Vector,
    hxi: &G::Vector,
) -> TaylorCheck {
    let phi0 = obj.cost(x);
    let a = geom.metric(x, grad, xi);
    let b = geom.metric(x, hxi, xi);
    taylor_fit(
        phi0,
        |t| Ok(obj.cost(&geom.retract(x, &xi.scaled(t))?)),
        |t| phi0 + t * a + 0.5 * t * t * b,
        |s| s >= 2.9,
    )
}

/// Gradient check along a random horizontal direction.
pub fn check_gradient<G: Geometry, O: Objective<G>>(geom: &G, obj: &O, x: &G::Point, seed: u64) -> Result<TaylorCheck> {
    let mut g = rng::stream(seed, 0);
    let xi = relative_unit(geom, x, geom.random_horizontal(x, &mut g)?);
    let fo = first_order(geom, obj, x);
    Ok(gradient_taylor(geom, obj, x, &xi, &fo.grad))
}

/// Symmetry defect and Taylor slope of the Hessian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HessianCheck {
    pub taylor: TaylorCheck,
    /// Max over random pairs of `|g(Hξ,η) − g(Hη,ξ)| / (‖Hξ‖‖η‖ + ‖Hη‖‖ξ‖)`.
    pub symmetry_defect: f64,
    pub passed: bool,
}

pub const SYMMETRY_TOL: f64 = 1e-8;
const SYMMETRY_PROBES: usize = 5;

/// Hessian check with an arbitrary Hessian action, for fault injection.
pub fn check_hessian_with<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x: &G::Point,
    seed: u64,
    hess: impl Fn(&G::Vector) -> Result<G::Vector>,
) -> Result<HessianCheck> {
    let mut g = rng::stream(seed, 1);
    let fo = first_order(geom, obj, x);
    let mut symmetry_defect = 0.0f64;
    for _ in 0..SYMMETRY_PROBES {
        let xi = geom.random_horizontal(x, &mut g)?;
        let eta = geom.random_horizontal(x, &mut g)?;
        let (hxi, heta) = (hess(&xi)?, hess(&eta)?);
        let num = (geom.metric(x, &hxi, &eta) - geom.metric(x, &heta, &xi)).abs();
        let den = geom.norm(x, &hxi) * geom.norm(x, &eta) + geom.norm(x, &heta) * geom.norm(x, &xi);
        if den > 0.0 {
            symmetry_defect = symmetry_defect.max(num / den);
        }
    }
    let xi = relative_unit(geom, x, geom.random_horizontal(x, &mut g)?);
    let hxi = hess(&xi)?;
    let taylor = hessian_taylor(geom, obj, x, &xi, &fo.grad, &hxi);
    let passed = taylor.passed && symmetry_defect <= SYMMETRY_TOL;
    Ok(HessianCheck { taylor, symmetry_defect, passed })
}

pub fn check_hessian<G: Geometry, O: Objective<G>>(geom: &G, obj: &O, x: &G::Point, seed: u64) -> Result<HessianCheck> {
    let fo = first_order(geom, obj, x);
    check_hessian_with(geom, obj, x, seed, |v| hessian_vector(geom, obj, x, &fo, v))
}

/// Relative defects of the horizontal projection at one point.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProjectionDefects {
    /// `‖Π Π η − Π η‖ / ‖Π η‖`
    pub idempotence: f64,
    /// `‖Π v‖ / ‖v‖` for vertical `v`
    pub vertical_annihilation: f64,
    /// `|g(Π η, v)| / (‖Π η‖ ‖v‖)`
    pub orthogonality: f64,
    /// `‖Π η − η + Σ c_k v_k‖ / ‖η‖` with `c` the metric least-squares fit onto the vertical basis
    pub basis_oracle: f64,
}

impl ProjectionDefects {
    /// Elementwise maximum with `o`.
    pub fn merge(&mut self, o: &ProjectionDefects) {
        self.idempotence = self.idempotence.max(o.idempotence);
        self.vertical_annihilation = self.vertical_annihilation.max(o.vertical_annihilation);
        self.orthogonality = self.orthogonality.max(o.orthogonality);
        self.basis_oracle = self.basis_oracle.max(o.basis_oracle);
    }
}

fn rel_norm<G: Geometry>(geom: &G, x: &G::Point, a: &G::Vector, scale: f64) -> f64 {
    if scale > 0.0 {
        geom.norm(x, a) / scale
    } else {
        geom.norm(x, a)
    }
}

/// `η − Σ c_k v_k` with `c` minimizing the metric norm.
///
/// The vertical basis is orthonormalized in the metric by modified
/// Gram–Schmidt, run twice; numerically dependent vectors are dropped.
pub fn basis_projection<G: Geometry>(geom: &G, x: &G::Point, eta: &G::Vector) -> G::Vector {
    let mut q: Vec<G::Vector> = Vec::new();
    for mut v in geom.vertical_basis(x) {
        let n0 = geom.norm(x, &v);
        for _ in 0..2 {
            for e in &q {
                let c = geom.metric(x, e, &v);
                v.axpy(-c, e);
            }
        }
        let n = geom.norm(x, &v);
        if n > 1e-10 * n0 {
            v.scale_mut(1.0 / n);
            q.push(v);
        }
    }
    let mut out = eta.clone();
    for _ in 0..2 {
        for e in &q {
            let c = geom.metric(x, e, &out);
            out.axpy(-c, e);
        }
    }
    out
}

/// Projection algebra at `x` over `probes` random tangent vectors.
pub fn projection_defects<G: Geometry>(geom: &G, x: &G::Point, g: &mut Rng, probes: usize) -> Result<ProjectionDefects> {
    let mut out = ProjectionDefects::default();
    for _ in 0..probes {
        let eta = geom.psi_project(x, &geom.random_ambient(x, g));
        let p = geom.pi_project(x, &eta)?;
        let pp = geom.pi_project(x, &p)?;
        let pn = geom.norm(x, &p);
        let eta_n = geom.norm(x, &eta);
        let v = geom.random_vertical(x, g);
        let vn = geom.norm(x, &v);
        let pv = geom.pi_project(x, &v)?;
        let oracle = basis_projection(geom, x, &eta);
        let d = ProjectionDefects {
            idempotence: rel_norm(geom, x, &pp.minus(&p), pn),
            vertical_annihilation: rel_norm(geom, x, &pv, vn),
            orthogonality: if pn * vn > 0.0 { geom.metric(x, &p, &v).abs() / (pn * vn) } else { 0.0 },
            basis_oracle: rel_norm(geom, x, &p.minus(&oracle), eta_n),
        };
        out.merge(&d);
    }
    Ok(out)
}

/// Metric duality `g(grad, η) = Dφ(x)[η]` and horizontality of the gradient.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityCheck {
    /// Max relative `|g(grad, η) − ⟨partials, η⟩|` over the probes.
    pub pairing: f64,
    /// `‖Π grad − grad‖ / ‖grad‖`
    pub horizontality: f64,
}

pub fn duality_check<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x: &G::Point,
    g: &mut Rng,
    probes: usize,
) -> Result<DualityCheck> {
    let fo = first_order(geom, obj, x);
    let mut pairing = 0.0f64;
    for _ in 0..probes {
        let eta = geom.psi_project(x, &geom.random_ambient(x, g));
        let a = geom.metric(x, &fo.grad, &eta);
        let b = geom.partials_pairing(x, &fo.partials, &eta);
        let scale = fo.grad_norm * geom.norm(x, &eta);
        if scale > 0.0 {
            pairing = pairing.max((a - b).abs() / scale);
        }
    }
    let pg = geom.pi_project(x, &fo.grad)?;
    let horizontality = rel_norm(geom, x, &pg.minus(&fo.grad), fo.grad_norm);
    Ok(DualityCheck { pairing, horizontality })
}

/// Agreement of metric, cost and retraction along the orbit `x ↦ x·M`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitCheck {
    pub metric: f64,
    pub cost: f64,
    /// Relative difference of `cost(R_x(ξ))` and `cost(R_{xM}(ξM))`.
    pub retraction_cost: f64,
    /// Relative difference of the dense retracted matrices.
    pub retraction_point: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s > 0.0 {
        (a - b).abs() / s
    } else {
        0.0
    }
}

/// `None` when the geometry has no continuous symmetry group.
pub fn orbit_check<G: Geometry, O: Objective<G>>(geom: &G, obj: &O, x: &G::Point, g: &mut Rng) -> Result<Option<OrbitCheck>> {
    let Some(m) = geom.random_group_element(x, g) else {
        return Ok(None);
    };
    let y = geom.act_point(x, &m);
    let xi = geom.random_horizontal(x, g)?;
    let eta = geom.random_horizontal(x, g)?;
    let (xi_y, eta_y) = (geom.act_vector(x, &xi, &m), geom.act_vector(x, &eta, &m));
    let rx = geom.retract(x, &xi)?;
    let ry = geom.retract(&y, &xi_y)?;
    let (wx, wy) = (geom.to_dense(&rx), geom.to_dense(&ry));
    Ok(Some(OrbitCheck {
        metric: rel(geom.metric(x, &xi, &eta), geom.metric(&y, &xi_y, &eta_y)),
        cost: rel(obj.cost(x), obj.cost(&y)),
        retraction_cost: rel(obj.cost(&rx), obj.cost(&ry)),
        retraction_point: (&wx - &wy).norm() / wx.norm().max(f64::MIN_POSITIVE),
    }))
}

/// First-order behaviour of the retraction in the dense ambient space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetractionCheck {
    /// `‖W(R_x(0)) − W(x)‖`
    pub zero_step: f64,
    /// Slope of `‖(W(R(tξ)) − W(x))/t − DW[ξ]‖` against `t`.
    pub slope: f64,
    pub passed: bool,
}

/// Dense check of `R(0) = x` and `DR(0) = id`. Small problems only.
pub fn retraction_check<G: Geometry>(geom: &G, x: &G::Point, xi: &G::Vector) -> Result<RetractionCheck> {
    let w0 = geom.to_dense(x);
    let zero_step = (geom.to_dense(&geom.retract(x, &xi.zeros_like())?) - &w0).norm();
    let dw = geom.differential_dense(x, xi);
    let ts = [1e-2, 1e-3, 1e-4];
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for &t in &ts {
        let wt = geom.to_dense(&geom.retract(x, &xi.scaled(t))?);
        let err = ((wt - &w0) / t - &dw).norm();
        if err > 0.0 {
            lx.push(t.log10());
            ly.push(err.log10());
        }
    }
    // an exact-to-rounding retraction has no measurable error term
    let slope = if lx.len() >= 2 { fit_slope(&lx, &ly) } else { f64::INFINITY };
    let passed = zero_step <= 1e-12 * w0.norm().max(1.0) && slope >= 0.9;
    Ok(RetractionCheck { zero_step, slope, passed })
}

/// Everything the `check` command reports for one geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub geometry: String,
    pub gradient: Option<TaylorCheck>,
    pub hessian: Option<HessianCheck>,
    pub projection: Option<ProjectionDefects>,
    pub duality: Option<DualityCheck>,
    pub orbit: Option<OrbitCheck>,
    pub passed: bool,
}

pub const IDEMPOTENCE_TOL: f64 = 1e-12;
pub const ANNIHILATION_TOL: f64 = 1e-12;
pub const ORTHOGONALITY_TOL: f64 = 1e-10;
pub const BASIS_TOL: f64 = 1e-9;
pub const DUALITY_TOL: f64 = 1e-10;
pub const ORBIT_TOL: f64 = 1e-10;

impl ProjectionDefects {
    pub fn passed(&self) -> bool {
        self.idempotence <= IDEMPOTENCE_TOL
            && self.vertical_annihilation <= ANNIHILATION_TOL
            && self.orthogonality <= ORTHOGONALITY_TOL
            && self.basis_oracle <= BASIS_TOL
    }
}

impl DualityCheck {
    pub fn passed(&self) -> bool {
        self.pairing <= DUALITY_TOL && self.horizontality <= 1e-12
    }
}

impl OrbitCheck {
    pub fn passed(&self) -> bool {
        self.metric <= ORBIT_TOL && self.cost <= ORBIT_TOL && self.retraction_cost <= ORBIT_TOL
    }
}

impl DiagnosticsReport {
    pub fn new(geometry: &str) -> Self {
        DiagnosticsReport {
            geometry: geometry.to_string(),
            gradient: None,
            hessian: None,
            projection: None,
            duality: None,
            orbit: None,
            passed: true,
        }
    }

    /// Recomputes [`passed`](DiagnosticsReport::passed) from the sections present.
    pub fn finish(mut self) -> Self {
        self.passed = self.gradient.as_ref().is_none_or(|c| c.passed)
            && self.hessian.as_ref().is_none_or(|c| c.passed)
            && self.projection.as_ref().is_none_or(|c| c.passed())
            && self.duality.as_ref().is_none_or(|c| c.passed())
            && self.orbit.as_ref().is_none_or(|c| c.passed());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Euclidean, FullRank, Metric, PointGh, Polar, Subspace, PointUbv, PointUy, TangentGh};
    use crate::linalg::{mul, mul_nt};
    use nalgebra::DMatrix;

    /// `φ(X) = ‖X − A‖² / 2` on the flat space.
    struct Quadratic {
        a: DMatrix<f64>,
    }

    impl Objective<Euclidean> for Quadratic {
        type State = DMatrix<f64>;

        fn cost(&self, x: &DMatrix<f64>) -> f64 {
            0.5 * (x - &self.a).norm_squared()
        }

        fn prepare(&self, x: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
            (self.cost(x), x - &self.a)
        }

        fn partials(&self, _x: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
            s.clone()
        }

        fn directional_partials(&self, _x: &DMatrix<f64>, _s: &DMatrix<f64>, xi: &DMatrix<f64>) -> DMatrix<f64> {
            xi.clone()
        }
    }

    /// Dense `‖G Hᵀ − A‖² / 2`, a quadratic-in-factors cost on the GH quotient.
    struct Factorization {
        a: DMatrix<f64>,
    }

    impl Objective<FullRank> for Factorization {
        type State = DMatrix<f64>;

        fn cost(&self, x: &PointGh) -> f64 {
            0.5 * (mul_nt(x.g(), x.h()) - &self.a).norm_squared()
        }

        fn prepare(&self, x: &PointGh) -> (f64, DMatrix<f64>) {
            let r = mul_nt(x.g(), x.h()) - &self.a;
            (0.5 * r.norm_squared(), r)
        }

        fn partials(&self, x: &PointGh, r: &DMatrix<f64>) -> TangentGh {
            TangentGh { g: mul(r, x.h()), h: r.transpose() * x.g() }
        }

        fn directional_partials(&self, x: &PointGh, r: &DMatrix<f64>, xi: &TangentGh) -> TangentGh {
            let dr = mul_nt(&xi.g, x.h()) + mul_nt(x.g(), &xi.h);
            TangentGh { g: mul(&dr, x.h()) + mul(r, &xi.h), h: dr.transpose() * x.g() + r.transpose() * &xi.g }
        }
    }

    fn factorization(seed: u64, d1: usize, d2: usize, r: usize) -> (Factorization, PointGh) {
        let mut g = rng::stream(seed, 0);
        let a = rng::gaussian(&mut g, d1, r) * rng::gaussian(&mut g, d2, r).transpose();
        let x = PointGh::new(rng::gaussian(&mut g, d1, r), rng::gaussian(&mut g, d2, r)).unwrap();
        (Factorization { a }, x)
    }

    #[test]
    fn steps_are_log_spaced() {
        let t = taylor_steps();
        assert_eq!(t.len(), 6);
        assert!((t[0] - 1e-6).abs() < 1e-20 && (t[5] - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn slope_fit_recovers_power_laws() {
        let x: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        assert!((fit_slope(&x, &y) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_direction_is_an_exact_pass() {
        let (obj, x) = factorization(1, 6, 5, 2);
        let geom = FullRank::default();
        let fo = first_order(&geom, &obj, &x);
        let zero = fo.grad.zeros_like();
        let c = gradient_taylor(&geom, &obj, &x, &zero, &fo.grad);
        assert!(c.passed && c.slope.is_none());
    }

    #[test]
    fn gradient_check_passes_and_catches_scaled_gradient() {
        let (obj, x) = factorization(2, 8, 7, 2);
        for geom in [FullRank::new(Metric::ScaleInvariant), FullRank::new(Metric::Euclidean)] {
            let c = check_gradient(&geom, &obj, &x, 3).unwrap();
            let s = c.slope.unwrap();
            assert!(c.passed, "{}: slope {s}", geom.name());
            let mut g = rng::stream(3, 0);
            let xi = relative_unit(&geom, &x, geom.random_horizontal(&x, &mut g).unwrap());
            let fo = first_order(&geom, &obj, &x);
            let bad = gradient_taylor(&geom, &obj, &x, &xi, &fo.grad.scaled(1.01));
            assert!(!bad.passed && (bad.slope.unwrap() - 1.0).abs() < 0.2, "{:?}", bad.slope);
        }
    }

    #[test]
    fn hessian_check_at_critical_point_and_identity_fault() {
        // x on the solution orbit of a rank-2 factorization
        let mut g = rng::stream(4, 0);
        let (gg, hh) = (rng::gaussian(&mut g, 8, 2), rng::gaussian(&mut g, 7, 2));
        let obj = Factorization { a: mul_nt(&gg, &hh) };
        let x = PointGh::new(gg, hh).unwrap();
        for geom in [FullRank::new(Metric::ScaleInvariant), FullRank::new(Metric::Euclidean)] {
            let c = check_hessian(&geom, &obj, &x, 5).unwrap();
            assert!(c.passed, "{}: {:?} sym {}", geom.name(), c.taylor.slope, c.symmetry_defect);
            let bad = check_hessian_with(&geom, &obj, &x, 5, |v| Ok(v.clone())).unwrap();
            assert!(!bad.passed);
            assert!((bad.taylor.slope.unwrap() - 2.0).abs() < 0.2);
        }
    }

    #[test]
    fn hessian_is_symmetric_away_from_critical_points() {
        let (obj, x) = factorization(6, 9, 8, 3);
        let c = check_hessian(&FullRank::default(), &obj, &x, 7).unwrap();
        assert!(c.symmetry_defect <= SYMMETRY_TOL, "{}", c.symmetry_defect);
    }

    #[test]
    fn flat_quadratic_hessian_is_exact() {
        let mut g = rng::stream(8, 0);
        let obj = Quadratic { a: rng::gaussian(&mut g, 4, 3) };
        let x = rng::gaussian(&mut g, 4, 3);
        let c = check_hessian(&Euclidean, &obj, &x, 9).unwrap();
        // the second-order model is exact up to rounding
        assert!(c.passed, "{:?}", c.taylor);
        assert_eq!(c.symmetry_defect, 0.0);
    }

    #[test]
    fn non_finite_cost_is_reported() {
        struct Bad;
        impl Objective<Euclidean> for Bad {
            type State = ();
            fn cost(&self, x: &DMatrix<f64>) -> f64 {
                if x[(0, 0)] > 1.0 { f64::NAN } else { x.norm_squared() }
            }
            fn prepare(&self, x: &DMatrix<f64>) -> (f64, ()) {
                (self.cost(x), ())
            }
            fn partials(&self, x: &DMatrix<f64>, _s: &()) -> DMatrix<f64> {
                x * 2.0
            }
            fn directional_partials(&self, _x: &DMatrix<f64>, _s: &(), xi: &DMatrix<f64>) -> DMatrix<f64> {
                xi * 2.0
            }
        }
        let x = DMatrix::from_element(1, 1, 1.0);
        let xi = DMatrix::from_element(1, 1, 1.0);
        let c = gradient_taylor(&Euclidean, &Bad, &x, &xi, &(x.clone() * 2.0));
        assert!(!c.passed);
        assert!(c.failure.unwrap().contains("non-finite"));
    }

    #[test]
    fn projection_and_duality_on_quotients() {
        let mut g = rng::stream(10, 0);
        let (obj, x) = factorization(10, 9, 7, 3);
        for geom in [FullRank::new(Metric::ScaleInvariant), FullRank::new(Metric::Euclidean)] {
            let d = projection_defects(&geom, &x, &mut g, 5).unwrap();
            assert!(d.passed(), "{}: {d:?}", geom.name());
            let du = duality_check(&geom, &obj, &x, &mut g, 10).unwrap();
            assert!(du.passed(), "{du:?}");
            let o = orbit_check(&geom, &obj, &x, &mut g).unwrap().unwrap();
            assert!(o.metric <= ORBIT_TOL || geom.metric == Metric::Euclidean, "{o:?}");
            assert!(o.cost <= ORBIT_TOL && o.retraction_cost <= ORBIT_TOL, "{o:?}");
        }
        let y = PointUbv::new(rng::orthonormal(&mut g, 9, 3), rng::spd(&mut g, 3, 0.5, 2.0), rng::orthonormal(&mut g, 7, 3)).unwrap();
        assert!(projection_defects(&Polar::default(), &y, &mut g, 5).unwrap().passed());
        let z = PointUy::new(rng::orthonormal(&mut g, 9, 3), rng::gaussian(&mut g, 7, 3)).unwrap();
        for m in [Metric::ScaleInvariant, Metric::Euclidean] {
            let d = projection_defects(&Subspace::new(m), &z, &mut g, 5).unwrap();
            assert!(d.passed(), "{m:?}: {d:?}");
        }
    }

    #[test]
    fn retraction_is_first_order() {
        let mut g = rng::stream(11, 0);
        let x = PointGh::new(rng::gaussian(&mut g, 6, 2), rng::gaussian(&mut g, 5, 2)).unwrap();
        let geom = FullRank::default();
        let xi = geom.random_horizontal(&x, &mut g).unwrap();
        let c = retraction_check(&geom, &x, &xi).unwrap();
        assert!(c.passed && c.zero_step == 0.0, "{c:?}");
    }

    #[test]
    fn report_round_trips_through_json() {
        let (obj, x) = factorization(12, 6, 5, 2);
        let geom = FullRank::default();
        let mut r = DiagnosticsReport::new(geom.name());
        r.gradient = Some(check_gradient(&geom, &obj, &x, 1).unwrap());
        let r = r.finish();
        let back: DiagnosticsReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back.passed, r.passed);
        assert_eq!(back.gradient.unwrap().residuals.len(), 6);
    }
}
