//! The rank-r matrices as an embedded submanifold of `R^{d1×d2}`, with
//! points stored as a thin SVD `U Σ Vᵀ`.
//!
//! A tangent vector `(N, U_p, V_p)` stands for `U N Vᵀ + U_p Vᵀ + U V_pᵀ` with
//! `UᵀU_p = 0` and `VᵀV_p = 0`. Nothing here forms a `d1 × d2` matrix.

use nalgebra::{DMatrix, DVector};

use super::{check_orthonormal, check_rank_shapes, orth_complement};
use crate::error::{Error, Result};
use crate::factor_tuple;
use crate::linalg::{self, mul, mul_nt, mul_tn, RANK_TOL};
use crate::manifold::{Geometry, TangentVector};
use crate::rng::{self, Rng};
use crate::sparse::SampledMatrix;

factor_tuple!(
    /// `(N, U_p, V_p)` representing `U N Vᵀ + U_p Vᵀ + U V_pᵀ`.
    TangentUsv { n, up, vp }
);

#[derive(Debug, Clone)]
pub struct PointUsv {
    u: DMatrix<f64>,
    s: DVector<f64>,
    v: DMatrix<f64>,
}

impl PointUsv {
    pub fn new(u: DMatrix<f64>, s: DVector<f64>, v: DMatrix<f64>) -> Result<Self> {
        check_rank_shapes(&u, &v)?;
        if s.len() != u.ncols() {
            return Err(Error::Shape(format!("{} singular values for rank {}", s.len(), u.ncols())));
        }
        check_orthonormal(&u)?;
        check_orthonormal(&v)?;
        if s.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Invalid("singular values must be positive".into()));
        }
        if s.as_slice().windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Invalid("singular values must be sorted descending".into()));
        }
        Ok(PointUsv { u, s, v })
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn into_factors(self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        (self.u, self.s, self.v)
    }

    /// `M Σ⁻¹`
    fn div_sigma(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] / self.s[j])
    }
}

/// The Euclidean gradient `Z` of a cost on `R^{d1×d2}`, or its directional
/// derivative, accessed only through products with thin matrices.
#[derive(Debug, Clone)]
pub enum AmbientGradient {
    Sparse(SampledMatrix),
    Dense(DMatrix<f64>),
}

impl AmbientGradient {
    /// `Z M`
    pub fn mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            AmbientGradient::Sparse(s) => s.mul_dense(m),
            AmbientGradient::Dense(z) => mul(z, m),
        }
    }

    /// `Zᵀ M`
    pub fn tr_mul(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            AmbientGradient::Sparse(s) => s.tr_mul_dense(m),
            AmbientGradient::Dense(z) => mul_tn(z, m),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            AmbientGradient::Sparse(s) => s.to_dense(),
            AmbientGradient::Dense(z) => z.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Embedded;

impl Embedded {
    /// Tangent projection `P_U Z P_V + P_U⊥ Z P_V + P_U Z P_V⊥` in factored form.
    pub fn project_ambient(&self, x: &PointUsv, z: &AmbientGradient) -> TangentUsv {
        let zv = z.mul(&x.v);
        let ztu = z.tr_mul(&x.u);
        let n = mul_tn(&x.u, &zv);
        let up = &zv - mul(&x.u, &n);
        let vp = &ztu - mul_nt(&x.v, &n);
        TangentUsv { n, up, vp }
    }

    /// Dense `U N Vᵀ + U_p Vᵀ + U V_pᵀ`. Tests only.
    pub fn tangent_to_dense(&self, x: &PointUsv, t: &TangentUsv) -> DMatrix<f64> {
        crate::opcount::note_ambient_dense();
        mul_nt(&(mul(&x.u, &t.n) + &t.up), &x.v) + mul_nt(&x.u, &t.vp)
    }

    fn dense_retract(&self, x: &PointUsv, xi: &TangentUsv) -> Result<PointUsv> {
        let w = self.to_dense(x) + self.tangent_to_dense(x, xi);
        let svd = linalg::thin_svd(&w, x.rank())?;
        if !(svd.s[x.rank() - 1] > RANK_TOL * svd.s[0]) {
            return Err(Error::RankDrop { smallest: svd.s[x.rank() - 1], largest: svd.s[0] });
        }
        Ok(PointUsv { u: svd.u, s: svd.s, v: svd.v })
    }
}

impl Geometry for Embedded {
    type Point = PointUsv;
    type Vector = TangentUsv;
    type Partials = AmbientGradient;

    fn name(&self) -> &'static str {
        "embedded"
    }

    fn metric(&self, _x: &PointUsv, a: &TangentUsv, b: &TangentUsv) -> f64 {
        a.euclidean_inner(b)
    }

    /// Rewrites an arbitrary `(N, U_p, V_p)` so that `UᵀU_p = 0` and `VᵀV_p = 0`,
    /// keeping the represented matrix.
    fn psi_project(&self, x: &PointUsv, z: &TangentUsv) -> TangentUsv {
        let n = &z.n + mul_tn(&x.u, &z.up) + mul_tn(&z.vp, &x.v);
        TangentUsv { n, up: orth_complement(&x.u, &z.up), vp: orth_complement(&x.v, &z.vp) }
    }

    fn pi_project(&self, _x: &PointUsv, v: &TangentUsv) -> Result<TangentUsv> {
        Ok(v.clone())
    }

    fn retract(&self, x: &PointUsv, xi: &TangentUsv) -> Result<PointUsv> {
        let r = x.rank();
        let (d1, d2) = (x.u.nrows(), x.v.nrows());
        if d1 < 2 * r || d2 < 2 * r {
            return self.dense_retract(x, xi);
        }
        crate::opcount::add(4 * (d1 + d2) * r * r + 100 * r * r * r);
        let qr_u = xi.up.clone().qr();
        let qr_v = xi.vp.clone().qr();
        let (qu, ru) = (qr_u.q(), qr_u.r());
        let (qv, rv) = (qr_v.q(), qr_v.r());
        // W + ξ = [U Q_U] [[Σ + N, R_Vᵀ], [R_U, 0]] [V Q_V]ᵀ
        let mut core = DMatrix::zeros(2 * r, 2 * r);
        let mut top_left = xi.n.clone();
        for i in 0..r {
            top_left[(i, i)] += x.s[i];
        }
        core.view_mut((0, 0), (r, r)).copy_from(&top_left);
        core.view_mut((0, r), (r, r)).copy_from(&rv.transpose());
        core.view_mut((r, 0), (r, r)).copy_from(&ru);
        let svd = linalg::thin_svd(&core, r)?;
        if !(svd.s[r - 1] > RANK_TOL * svd.s[0]) {
            return Err(Error::RankDrop { smallest: svd.s[r - 1], largest: svd.s[0] });
        }
        let mut basis_u = DMatrix::zeros(d1, 2 * r);
        basis_u.view_mut((0, 0), (d1, r)).copy_from(&x.u);
        basis_u.view_mut((0, r), (d1, r)).copy_from(&qu);
        let mut basis_v = DMatrix::zeros(d2, 2 * r);
        basis_v.view_mut((0, 0), (d2, r)).copy_from(&x.v);
        basis_v.view_mut((0, r), (d2, r)).copy_from(&qv);
        let mut u = mul(&basis_u, &svd.u);
        let mut v = mul(&basis_v, &svd.v);
        linalg::normalize_svd_signs(&mut u, &mut v);
        Ok(PointUsv { u, s: svd.s, v })
    }

    fn rgrad_from_partials(&self, x: &PointUsv, z: &AmbientGradient) -> TangentUsv {
        self.project_ambient(x, z)
    }

    fn hess_apply(
        &self,
        x: &PointUsv,
        xi: &TangentUsv,
        z: &AmbientGradient,
        dz: &AmbientGradient,
    ) -> Result<TangentUsv> {
        let base = self.project_ambient(x, dz);
        let up = &base.up + orth_complement(&x.u, &x.div_sigma(&z.mul(&xi.vp)));
        let vp = &base.vp + orth_complement(&x.v, &x.div_sigma(&z.tr_mul(&xi.up)));
        Ok(TangentUsv { n: base.n, up, vp })
    }

    fn partials_pairing(&self, x: &PointUsv, z: &AmbientGradient, v: &TangentUsv) -> f64 {
        let zv = z.mul(&x.v);
        let ztu = z.tr_mul(&x.u);
        linalg::inner(&mul_tn(&x.u, &zv), &v.n) + linalg::inner(&zv, &v.up) + linalg::inner(&ztu, &v.vp)
    }

    fn random_ambient(&self, x: &PointUsv, rng: &mut Rng) -> TangentUsv {
        let r = x.rank();
        TangentUsv {
            n: rng::gaussian(rng, r, r),
            up: rng::gaussian(rng, x.u.nrows(), r),
            vp: rng::gaussian(rng, x.v.nrows(), r),
        }
    }

    fn to_dense(&self, x: &PointUsv) -> DMatrix<f64> {
        crate::opcount::note_ambient_dense();
        let us = DMatrix::from_fn(x.u.nrows(), x.rank(), |i, j| x.u[(i, j)] * x.s[j]);
        mul_nt(&us, &x.v)
    }

    fn differential_dense(&self, x: &PointUsv, v: &TangentUsv) -> DMatrix<f64> {
        self.tangent_to_dense(x, v)
    }
}
