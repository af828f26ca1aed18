//! `W = U B Vᵀ` with Stiefel `U`, `V` and SPD `B`, modulo `O(r)`.
//!
//! [`BMode::Diagonal`] restricts `B` to positive diagonal matrices. The fiber
//! is then discrete, so the horizontal projection is the identity.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{check_orthonormal, check_rank_shapes, skew_basis, stiefel_project};
use crate::error::{Error, Result};
use crate::factor_tuple;
use crate::linalg::{self, mul, mul_nt, mul_tn, SkewConvention, SpdMatrix};
use crate::manifold::{Geometry, TangentVector};
use crate::rng::{self, Rng};

factor_tuple!(
    /// Factor-wise perturbation `(ξ_U, ξ_B, ξ_V)`; also used for partial derivatives.
    TangentUbv { u, b, v }
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BMode {
    #[default]
    Spd,
    Diagonal,
}

#[derive(Debug, Clone)]
pub struct PointUbv {
    u: DMatrix<f64>,
    b: SpdMatrix,
    v: DMatrix<f64>,
}

impl PointUbv {
    pub fn new(u: DMatrix<f64>, b: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        check_rank_shapes(&u, &v)?;
        if b.shape() != (u.ncols(), u.ncols()) {
            return Err(Error::Shape(format!("B is {:?}, rank is {}", b.shape(), u.ncols())));
        }
        check_orthonormal(&u)?;
        check_orthonormal(&v)?;
        Ok(PointUbv { u, b: SpdMatrix::new(b)?, v })
    }

    fn from_parts(u: DMatrix<f64>, b: SpdMatrix, v: DMatrix<f64>) -> Self {
        PointUbv { u, b, v }
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn b(&self) -> &SpdMatrix {
        &self.b
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }

    pub fn into_factors(self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        (self.u, self.b.into_matrix(), self.v)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Polar {
    pub b_mode: BMode,
    pub skew: SkewConvention,
}

impl Polar {
    pub fn new(b_mode: BMode) -> Self {
        Polar { b_mode, skew: SkewConvention::Standard }
    }

    /// Restriction applied to symmetric `B`-slot quantities.
    fn restrict(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self.b_mode {
            BMode::Spd => linalg::sym(a),
            BMode::Diagonal => linalg::diag_part(a),
        }
    }

    fn retract_b(&self, b: &SpdMatrix, xi: &DMatrix<f64>) -> Result<SpdMatrix> {
        match self.b_mode {
            BMode::Spd => {
                // B^{1/2} exp(B^{-1/2} ξ B^{-1/2}) B^{1/2}
                let half = b.sqrt();
                let ihalf = b.inv_sqrt();
                let e = linalg::sym_expm(&linalg::sym(&(&ihalf * xi * &ihalf)))?;
                SpdMatrix::from_symmetrized(&half * e.matrix() * &half)
            }
            BMode::Diagonal => {
                let bd = b.matrix().diagonal();
                let out = DMatrix::from_fn(bd.len(), bd.len(), |i, j| {
                    if i == j {
                        bd[i] * (xi[(i, i)] / bd[i]).exp()
                    } else {
                        0.0
                    }
                });
                linalg::ensure_finite(&out, "diagonal B")?;
                SpdMatrix::new(out)
            }
        }
    }
}

/// `Tr(B⁻¹ ξ B⁻¹ η)`
fn spd_pairing(b: &SpdMatrix, xi: &DMatrix<f64>, eta: &DMatrix<f64>) -> f64 {
    let x = b.solve(xi);
    let y = b.solve(eta);
    linalg::inner(&x, &y.transpose())
}

/// Directional derivative of the Stiefel-projected gradient `φ − U Sym(Uᵀφ)` along `ξ_U`.
pub(crate) fn stiefel_grad_derivative(
    u: &DMatrix<f64>,
    xi: &DMatrix<f64>,
    phi: &DMatrix<f64>,
    dphi: &DMatrix<f64>,
) -> DMatrix<f64> {
    let s = linalg::sym(&mul_tn(u, phi));
    let ds = linalg::sym(&(mul_tn(xi, phi) + mul_tn(u, dphi)));
    dphi - mul(xi, &s) - mul(u, &ds)
}

impl Geometry for Polar {
    type Point = PointUbv;
    type Vector = TangentUbv;
    type Partials = TangentUbv;

    fn name(&self) -> &'static str {
        match self.b_mode {
            BMode::Spd => "ubv",
            BMode::Diagonal => "ubv-diag",
        }
    }

    fn metric(&self, x: &PointUbv, a: &TangentUbv, b: &TangentUbv) -> f64 {
        linalg::inner(&a.u, &b.u) + spd_pairing(&x.b, &a.b, &b.b) + linalg::inner(&a.v, &b.v)
    }

    fn psi_project(&self, x: &PointUbv, z: &TangentUbv) -> TangentUbv {
        TangentUbv { u: stiefel_project(&x.u, &z.u), b: self.restrict(&z.b), v: stiefel_project(&x.v, &z.v) }
    }

    fn pi_project(&self, x: &PointUbv, eta: &TangentUbv) -> Result<TangentUbv> {
        if self.b_mode == BMode::Diagonal {
            return Ok(eta.clone());
        }
        // Ω B² + B² Ω = B (Skew(Uᵀη_U) − 2 Skew(B⁻¹η_B) + Skew(Vᵀη_V)) B
        let conv = self.skew;
        let b = x.b.matrix();
        let inner = linalg::skew(&mul_tn(&x.u, &eta.u), conv) - linalg::skew(&x.b.solve(&eta.b), conv) * 2.0
            + linalg::skew(&mul_tn(&x.v, &eta.v), conv);
        let b2 = SpdMatrix::from_symmetrized(x.b.map_spectrum(|l| l * l))?;
        let omega = linalg::solve_lyapunov(&b2, &(b * inner * b))?;
        Ok(TangentUbv {
            u: &eta.u - mul(&x.u, &omega),
            b: &eta.b - (b * &omega - &omega * b),
            v: &eta.v - mul(&x.v, &omega),
        })
    }

    fn retract(&self, x: &PointUbv, xi: &TangentUbv) -> Result<PointUbv> {
        let u = linalg::polar_factor(&(&x.u + &xi.u))?;
        let v = linalg::polar_factor(&(&x.v + &xi.v))?;
        let b = self.retract_b(&x.b, &xi.b)?;
        Ok(PointUbv::from_parts(u, b, v))
    }

    fn rgrad_from_partials(&self, x: &PointUbv, p: &TangentUbv) -> TangentUbv {
        let b = x.b.matrix();
        TangentUbv {
            u: stiefel_project(&x.u, &p.u),
            b: b * self.restrict(&p.b) * b,
            v: stiefel_project(&x.v, &p.v),
        }
    }

    fn hess_apply(&self, x: &PointUbv, xi: &TangentUbv, p: &TangentUbv, dp: &TangentUbv) -> Result<TangentUbv> {
        let b = x.b.matrix();
        let s = self.restrict(&p.b);
        let grad_b = b * &s * b;
        let dgrad_b = linalg::sym(&(&xi.b * &s * b)) * 2.0 + b * self.restrict(&dp.b) * b;
        // affine-invariant connection on the SPD factor
        let conn_b = -linalg::sym(&(&xi.b * x.b.solve(&grad_b)));
        let full = TangentUbv {
            u: stiefel_grad_derivative(&x.u, &xi.u, &p.u, &dp.u),
            b: dgrad_b + conn_b,
            v: stiefel_grad_derivative(&x.v, &xi.v, &p.v, &dp.v),
        };
        self.pi_project(x, &self.psi_project(x, &full))
    }

    fn partials_pairing(&self, _x: &PointUbv, p: &TangentUbv, v: &TangentUbv) -> f64 {
        p.euclidean_inner(v)
    }

    fn random_ambient(&self, x: &PointUbv, rng: &mut Rng) -> TangentUbv {
        let r = x.rank();
        TangentUbv {
            u: rng::gaussian(rng, x.u.nrows(), r),
            b: rng::gaussian(rng, r, r),
            v: rng::gaussian(rng, x.v.nrows(), r),
        }
    }

    fn vertical_basis(&self, x: &PointUbv) -> Vec<TangentUbv> {
        if self.b_mode == BMode::Diagonal {
            return Vec::new();
        }
        let b = x.b.matrix();
        skew_basis(x.rank())
            .into_iter()
            .map(|o| TangentUbv { u: mul(&x.u, &o), b: b * &o - &o * b, v: mul(&x.v, &o) })
            .collect()
    }

    fn random_group_element(&self, x: &PointUbv, rng: &mut Rng) -> Option<DMatrix<f64>> {
        match self.b_mode {
            BMode::Spd => Some(rng::orthogonal(rng, x.rank())),
            BMode::Diagonal => None,
        }
    }

    /// `(U O, Oᵀ B O, V O)`
    fn act_point(&self, x: &PointUbv, o: &DMatrix<f64>) -> PointUbv {
        let b = SpdMatrix::from_symmetrized(o.transpose() * x.b.matrix() * o).expect("congruence preserves SPD");
        PointUbv::from_parts(mul(&x.u, o), b, mul(&x.v, o))
    }

    fn act_vector(&self, _x: &PointUbv, v: &TangentUbv, o: &DMatrix<f64>) -> TangentUbv {
        TangentUbv { u: mul(&v.u, o), b: o.transpose() * &v.b * o, v: mul(&v.v, o) }
    }

    fn to_dense(&self, x: &PointUbv) -> DMatrix<f64> {
        crate::opcount::note_ambient_dense();
        mul_nt(&mul(&x.u, x.b.matrix()), &x.v)
    }

    fn differential_dense(&self, x: &PointUbv, t: &TangentUbv) -> DMatrix<f64> {
        let b = x.b.matrix();
        mul_nt(&(mul(&t.u, b) + mul(&x.u, &t.b)), &x.v) + mul_nt(&mul(&x.u, b), &t.v)
    }
}

/// Skew part of `ξ_UᵀU + B⁻¹ξ_B − ξ_B B⁻¹ + ξ_VᵀV`, which vanishes exactly on horizontal vectors.
pub fn horizontality_defect(x: &PointUbv, v: &TangentUbv) -> f64 {
    let m = mul_tn(&v.u, &x.u) + x.b.solve(&v.b) - x.b.solve(&v.b.transpose()).transpose() + mul_tn(&v.v, &x.v);
    linalg::skew_std(&m).amax()
}
