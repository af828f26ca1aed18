//! `W = U Yᵀ` with Stiefel `U` and full-rank `Y`, modulo `O(r)`.

use nalgebra::DMatrix;

use super::polar::stiefel_grad_derivative;
use super::{check_orthonormal, check_rank_shapes, skew_basis, stiefel_project, Metric};
use crate::error::Result;
use crate::factor_tuple;
use crate::linalg::{self, mul, mul_nt, mul_tn, SkewConvention, SpdMatrix};
use crate::manifold::{Geometry, TangentVector};
use crate::rng::{self, Rng};

factor_tuple!(
    /// Factor-wise perturbation `(ξ_U, ξ_Y)`; also used for partial derivatives.
    TangentUy { u, y }
);

#[derive(Debug, Clone)]
pub struct PointUy {
    u: DMatrix<f64>,
    y: DMatrix<f64>,
    gram_y: SpdMatrix,
}

impl PointUy {
    pub fn new(u: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        check_rank_shapes(&u, &y)?;
        check_orthonormal(&u)?;
        Self::with_orthonormal(u, y)
    }

    fn with_orthonormal(u: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        linalg::ensure_full_column_rank(&y)?;
        let gram_y = SpdMatrix::from_symmetrized(mul_tn(&y, &y))?;
        Ok(PointUy { u, y, gram_y })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// `YᵀY`
    pub fn gram_y(&self) -> &SpdMatrix {
        &self.gram_y
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn into_factors(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.u, self.y)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Subspace {
    pub metric: Metric,
    pub skew: SkewConvention,
}

impl Subspace {
    pub fn new(metric: Metric) -> Self {
        Subspace { metric, skew: SkewConvention::Standard }
    }
}

impl Geometry for Subspace {
    type Point = PointUy;
    type Vector = TangentUy;
    type Partials = TangentUy;

    fn name(&self) -> &'static str {
        match self.metric {
            Metric::ScaleInvariant => "uy",
            Metric::Euclidean => "uy-euclidean",
        }
    }

    fn metric(&self, x: &PointUy, a: &TangentUy, b: &TangentUy) -> f64 {
        let y_term = match self.metric {
            Metric::ScaleInvariant => x.gram_y.solve(&mul_tn(&a.y, &b.y)).trace(),
            Metric::Euclidean => linalg::inner(&a.y, &b.y),
        };
        linalg::inner(&a.u, &b.u) + y_term
    }

    fn psi_project(&self, x: &PointUy, z: &TangentUy) -> TangentUy {
        TangentUy { u: stiefel_project(&x.u, &z.u), y: z.y.clone() }
    }

    fn pi_project(&self, x: &PointUy, eta: &TangentUy) -> Result<TangentUy> {
        let c = &x.gram_y;
        let omega = match self.metric {
            Metric::ScaleInvariant => {
                // Ω + Skew(C Ω C⁻¹) = Skew(Uᵀη_U + Yᵀη_Y C⁻¹), diagonal in the eigenbasis of C.
                // Same solution as the nested pair C Ω̃ + Ω̃ C = 2 Skew(C Uᵀη_U C) − 2 Skew(η_YᵀY C),
                // C Ω + Ω C = Ω̃, without squaring the conditioning of C.
                let (q, lam) = (c.eigenvectors(), c.eigenvalues());
                let a = mul_tn(q, &mul(&mul_tn(&x.u, &eta.u), q));
                let mut m = mul_tn(q, &mul(&mul_tn(&x.y, &eta.y), q));
                for (j, mut col) in m.column_iter_mut().enumerate() {
                    col /= lam[j];
                }
                let mut w = linalg::skew(&(a + m), self.skew);
                for j in 0..w.ncols() {
                    for i in 0..w.nrows() {
                        let s = lam[i] + lam[j];
                        w[(i, j)] *= 2.0 * lam[i] * lam[j] / (s * s);
                    }
                }
                mul_nt(&mul(q, &w), q)
            }
            Metric::Euclidean => {
                // ((I + C)/2) Ω + Ω ((I + C)/2) = Skew(Uᵀη_U) + Skew(Yᵀη_Y)
                let r = x.rank();
                let half = SpdMatrix::from_symmetrized((DMatrix::identity(r, r) + c.matrix()) * 0.5)?;
                let rhs = linalg::skew_std(&mul_tn(&x.u, &eta.u)) + linalg::skew_std(&mul_tn(&x.y, &eta.y));
                linalg::solve_lyapunov(&half, &rhs)?
            }
        };
        Ok(TangentUy { u: &eta.u - mul(&x.u, &omega), y: &eta.y - mul(&x.y, &omega) })
    }

    fn retract(&self, x: &PointUy, xi: &TangentUy) -> Result<PointUy> {
        let u = linalg::polar_factor(&(&x.u + &xi.u))?;
        PointUy::with_orthonormal(u, &x.y + &xi.y)
    }

    fn rgrad_from_partials(&self, x: &PointUy, p: &TangentUy) -> TangentUy {
        let y = match self.metric {
            Metric::ScaleInvariant => mul(&p.y, x.gram_y.matrix()),
            Metric::Euclidean => p.y.clone(),
        };
        TangentUy { u: stiefel_project(&x.u, &p.u), y }
    }

    fn hess_apply(&self, x: &PointUy, xi: &TangentUy, p: &TangentUy, dp: &TangentUy) -> Result<TangentUy> {
        let y = match self.metric {
            Metric::ScaleInvariant => {
                let c = &x.gram_y;
                let grad_y = mul(&p.y, c.matrix());
                let dgrad = mul(&dp.y, c.matrix()) + mul(&p.y, &linalg::sym(&mul_tn(&x.y, &xi.y))) * 2.0;
                let s_xi = linalg::sym(&mul_tn(&x.y, &xi.y));
                let s_grad = linalg::sym(&mul_tn(&x.y, &grad_y));
                let s_cross = linalg::sym(&mul_tn(&grad_y, &xi.y));
                dgrad - mul(&grad_y, &c.solve(&s_xi)) - mul(&xi.y, &c.solve(&s_grad)) + mul(&x.y, &c.solve(&s_cross))
            }
            Metric::Euclidean => dp.y.clone(),
        };
        let full = TangentUy { u: stiefel_grad_derivative(&x.u, &xi.u, &p.u, &dp.u), y };
        self.pi_project(x, &self.psi_project(x, &full))
    }

    fn partials_pairing(&self, _x: &PointUy, p: &TangentUy, v: &TangentUy) -> f64 {
        p.euclidean_inner(v)
    }

    fn random_ambient(&self, x: &PointUy, rng: &mut Rng) -> TangentUy {
        TangentUy { u: rng::gaussian(rng, x.u.nrows(), x.rank()), y: rng::gaussian(rng, x.y.nrows(), x.rank()) }
    }

    fn vertical_basis(&self, x: &PointUy) -> Vec<TangentUy> {
        skew_basis(x.rank()).into_iter().map(|o| TangentUy { u: mul(&x.u, &o), y: mul(&x.y, &o) }).collect()
    }

    fn random_group_element(&self, x: &PointUy, rng: &mut Rng) -> Option<DMatrix<f64>> {
        Some(rng::orthogonal(rng, x.rank()))
    }

    /// `(U O, Y O)`
    fn act_point(&self, x: &PointUy, o: &DMatrix<f64>) -> PointUy {
        PointUy::with_orthonormal(mul(&x.u, o), mul(&x.y, o)).expect("orthogonal action preserves rank")
    }

    fn act_vector(&self, _x: &PointUy, v: &TangentUy, o: &DMatrix<f64>) -> TangentUy {
        TangentUy { u: mul(&v.u, o), y: mul(&v.y, o) }
    }

    fn to_dense(&self, x: &PointUy) -> DMatrix<f64> {
        crate::opcount::note_ambient_dense();
        mul_nt(&x.u, &x.y)
    }

    fn differential_dense(&self, x: &PointUy, v: &TangentUy) -> DMatrix<f64> {
        mul_nt(&v.u, &x.y) + mul_nt(&x.u, &v.y)
    }
}

/// Skew part of `ξ_UᵀU + (YᵀY)⁻¹ξ_YᵀY` (scale-invariant metric); zero exactly on horizontal vectors.
pub fn horizontality_defect(x: &PointUy, v: &TangentUy) -> f64 {
    let m = mul_tn(&v.u, &x.u) + x.gram_y.solve(&mul_tn(&v.y, &x.y));
    linalg::skew_std(&m).amax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn point(seed: u64, d1: usize, d2: usize, r: usize) -> PointUy {
        let mut g = rng::stream(seed, 0);
        PointUy::new(rng::orthonormal(&mut g, d1, r), rng::gaussian(&mut g, d2, r)).unwrap()
    }

    #[test]
    fn metric_examples() {
        let x = PointUy::new(dmatrix![1.0; 0.0], dmatrix![2.0; 0.0]).unwrap();
        let xi = TangentUy { u: DMatrix::zeros(2, 1), y: dmatrix![2.0; 0.0] };
        assert!((Subspace::new(Metric::ScaleInvariant).metric(&x, &xi, &xi) - 1.0).abs() < 1e-15);
        assert!((Subspace::new(Metric::Euclidean).metric(&x, &xi, &xi) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn metrics_agree_for_orthonormal_y() {
        let mut g = rng::stream(1, 0);
        let x = PointUy::new(rng::orthonormal(&mut g, 5, 2), rng::orthonormal(&mut g, 4, 2)).unwrap();
        let a = Subspace::default().random_ambient(&x, &mut g);
        let b = Subspace::default().random_ambient(&x, &mut g);
        let si = Subspace::new(Metric::ScaleInvariant).metric(&x, &a, &b);
        let eu = Subspace::new(Metric::Euclidean).metric(&x, &a, &b);
        assert!((si - eu).abs() < 1e-12 * si.abs().max(1.0));
    }

    #[test]
    fn scaling_y_by_constant() {
        let x = point(2, 5, 4, 2);
        let mut g = rng::stream(2, 1);
        let a = Subspace::default().random_ambient(&x, &mut g);
        let c = 3.0;
        let xc = PointUy::new(x.u.clone(), &x.y * c).unwrap();
        let ac = TangentUy { u: a.u.clone(), y: &a.y * c };
        let a_y = TangentUy { u: DMatrix::zeros(5, 2), y: a.y.clone() };
        let ac_y = TangentUy { u: DMatrix::zeros(5, 2), y: &a.y * c };
        for metric in [Metric::ScaleInvariant, Metric::Euclidean] {
            let geom = Subspace::new(metric);
            let before = geom.metric(&x, &a_y, &a_y);
            let after = geom.metric(&xc, &ac_y, &ac_y);
            let want = if metric == Metric::ScaleInvariant { before } else { before * c * c };
            assert!((after - want).abs() < 1e-12 * want);
        }
        let si = Subspace::default();
        assert!((si.metric(&x, &a, &a) - si.metric(&xc, &ac, &ac)).abs() < 1e-12 * si.metric(&x, &a, &a));
    }

    #[test]
    fn psi_examples() {
        let geom = Subspace::default();
        let x = point(3, 6, 5, 2);
        let z = TangentUy { u: x.u.clone(), y: DMatrix::zeros(5, 2) };
        assert!(geom.psi_project(&x, &z).u.amax() < 1e-14);
        let mut g = rng::stream(3, 1);
        let t = geom.psi_project(&x, &geom.random_ambient(&x, &mut g));
        assert!(geom.psi_project(&x, &t).minus(&t).max_abs() < 1e-14);
    }

    #[test]
    fn projection_is_horizontal() {
        let geom = Subspace::default();
        let x = point(4, 6, 5, 3);
        let mut g = rng::stream(4, 1);
        let h = geom.random_horizontal(&x, &mut g).unwrap();
        assert!(horizontality_defect(&x, &h) < 1e-10 * h.max_abs());
        let v = geom.random_vertical(&x, &mut g);
        assert!(geom.pi_project(&x, &v).unwrap().max_abs() < 1e-12 * v.max_abs());
    }

    #[test]
    fn euclidean_projection_is_orthogonal_to_verticals() {
        let geom = Subspace::new(Metric::Euclidean);
        let x = point(5, 6, 5, 3);
        let mut g = rng::stream(5, 1);
        let h = geom.random_horizontal(&x, &mut g).unwrap();
        for w in geom.vertical_basis(&x) {
            assert!(geom.metric(&x, &h, &w).abs() < 1e-12 * geom.norm(&x, &h) * geom.norm(&x, &w));
        }
    }

    #[test]
    fn retraction_examples() {
        let geom = Subspace::default();
        let x = point(6, 6, 5, 2);
        let zero = TangentUy { u: DMatrix::zeros(6, 2), y: DMatrix::zeros(5, 2) };
        let y = geom.retract(&x, &zero).unwrap();
        assert!((y.u.clone() - &x.u).amax() < 1e-14);
        assert_eq!(y.y, x.y);
        let mut g = rng::stream(6, 1);
        let xi = TangentUy { u: DMatrix::zeros(6, 2), y: rng::gaussian(&mut g, 5, 2) };
        assert_eq!(geom.retract(&x, &xi).unwrap().y, &x.y + &xi.y);
        let collapse = TangentUy { u: DMatrix::zeros(6, 2), y: -x.y.clone() };
        assert!(geom.retract(&x, &collapse).is_err());
        let collapse = TangentUy { u: -x.u.clone(), y: DMatrix::zeros(5, 2) };
        assert!(geom.retract(&x, &collapse).is_err());
    }

    #[test]
    fn gradient_with_orthonormal_y() {
        let mut g = rng::stream(7, 0);
        let x = PointUy::new(rng::orthonormal(&mut g, 5, 2), rng::orthonormal(&mut g, 4, 2)).unwrap();
        let geom = Subspace::default();
        let p = geom.random_ambient(&x, &mut g);
        let grad = geom.rgrad_from_partials(&x, &p);
        assert!((grad.y - &p.y).amax() < 1e-14);
        assert!((grad.u - stiefel_project(&x.u, &p.u)).amax() < 1e-15);
        assert_eq!(geom.rgrad_from_partials(&x, &p.zeros_like()).max_abs(), 0.0);
    }

    #[test]
    fn transposed_skew_fails_to_annihilate() {
        let geom = Subspace { metric: Metric::ScaleInvariant, skew: SkewConvention::Transposed };
        let x = point(8, 6, 5, 3);
        let mut g = rng::stream(8, 1);
        let v = geom.random_vertical(&x, &mut g);
        assert!(geom.pi_project(&x, &v).unwrap().max_abs() > 1e-3 * v.max_abs());
    }
}
