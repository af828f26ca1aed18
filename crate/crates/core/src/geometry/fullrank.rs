//! `W = G Hᵀ` with both factors of full column rank, modulo `GL(r)`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use super::{check_rank_shapes, full_basis, Metric};
use crate::error::{Error, Result};
use crate::factor_tuple;
use crate::linalg::{self, mul, mul_nt, mul_tn, SpdMatrix};
use crate::manifold::{Geometry, TangentVector};
use crate::rng::{self, Rng};

factor_tuple!(
    /// Factor-wise perturbation `(ξ_G, ξ_H)`; also used for partial derivatives.
    TangentGh { g, h }
);

#[derive(Debug, Clone)]
pub struct PointGh {
    g: DMatrix<f64>,
    h: DMatrix<f64>,
    gram_g: SpdMatrix,
    gram_h: SpdMatrix,
    frame: OnceLock<Frame>,
}

/// Thin QRs `G = Q_G R_G`, `H = Q_H R_H` and the SVD `R_H R_Gᵀ = P Σ Qᵀ`.
#[derive(Debug, Clone)]
struct Frame {
    q_g: DMatrix<f64>,
    r_g: DMatrix<f64>,
    q_h: DMatrix<f64>,
    r_h: DMatrix<f64>,
    p: DMatrix<f64>,
    sigma: DVector<f64>,
    q: DMatrix<f64>,
}

impl Frame {
    fn new(g: &DMatrix<f64>, h: &DMatrix<f64>) -> Self {
        let (d1, d2, r) = (g.nrows(), h.nrows(), g.ncols());
        crate::opcount::add(4 * (d1 + d2) * r * r + 20 * r * r * r);
        let (qr_g, qr_h) = (g.clone().qr(), h.clone().qr());
        let (r_g, r_h) = (qr_g.r(), qr_h.r());
        let svd = mul_nt(&r_h, &r_g).svd(true, true);
        Frame {
            q_g: qr_g.q(),
            r_g,
            q_h: qr_h.q(),
            r_h,
            p: svd.u.expect("requested"),
            sigma: svd.singular_values,
            q: svd.v_t.expect("requested").transpose(),
        }
    }
}

/// `X R⁻¹` for upper-triangular `R`.
fn right_solve(r: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    r.tr_solve_upper_triangular(&x.transpose())
        .map(|y| y.transpose())
        .ok_or_else(|| Error::SingularCoefficient { smallest: r.diagonal().abs().min(), norm: r.amax() })
}

impl PointGh {
    pub fn new(g: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        check_rank_shapes(&g, &h)?;
        linalg::ensure_full_column_rank(&g)?;
        linalg::ensure_full_column_rank(&h)?;
        let gram_g = SpdMatrix::from_symmetrized(mul_tn(&g, &g))?;
        let gram_h = SpdMatrix::from_symmetrized(mul_tn(&h, &h))?;
        Ok(PointGh { g, h, gram_g, gram_h, frame: OnceLock::new() })
    }

    fn frame(&self) -> &Frame {
        self.frame.get_or_init(|| Frame::new(&self.g, &self.h))
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `GᵀG`
    pub fn gram_g(&self) -> &SpdMatrix {
        &self.gram_g
    }

    /// `HᵀH`
    pub fn gram_h(&self) -> &SpdMatrix {
        &self.gram_h
    }

    pub fn rank(&self) -> usize {
        self.g.ncols()
    }

    pub fn into_factors(self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.g, self.h)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FullRank {
    pub metric: Metric,
}

impl FullRank {
    pub fn new(metric: Metric) -> Self {
        FullRank { metric }
    }
}

/// `Tr(A⁻¹ ξᵀη)`
fn scaled_pairing(gram: &SpdMatrix, xi: &DMatrix<f64>, eta: &DMatrix<f64>) -> f64 {
    gram.solve(&mul_tn(xi, eta)).trace()
}

/// Connection correction for one factor under the metric `Tr((FᵀF)⁻¹ ξᵀη)`.
fn connection_term(f: &DMatrix<f64>, gram: &SpdMatrix, xi: &DMatrix<f64>, eta: &DMatrix<f64>) -> DMatrix<f64> {
    let s_xi = linalg::sym(&mul_tn(f, xi));
    let s_eta = linalg::sym(&mul_tn(f, eta));
    let s_cross = linalg::sym(&mul_tn(eta, xi));
    -mul(eta, &gram.solve(&s_xi)) - mul(xi, &gram.solve(&s_eta)) + mul(f, &gram.solve(&s_cross))
}

impl Geometry for FullRank {
    type Point = PointGh;
    type Vector = TangentGh;
    type Partials = TangentGh;

    fn name(&self) -> &'static str {
        match self.metric {
            Metric::ScaleInvariant => "gh",
            Metric::Euclidean => "gh-euclidean",
        }
    }

    fn metric(&self, x: &PointGh, a: &TangentGh, b: &TangentGh) -> f64 {
        match self.metric {
            Metric::ScaleInvariant => {
                scaled_pairing(&x.gram_g, &a.g, &b.g) + scaled_pairing(&x.gram_h, &a.h, &b.h)
            }
            Metric::Euclidean => a.euclidean_inner(b),
        }
    }

    fn psi_project(&self, _x: &PointGh, z: &TangentGh) -> TangentGh {
        z.clone()
    }

    fn pi_project(&self, x: &PointGh, v: &TangentGh) -> Result<TangentGh> {
        match self.metric {
            Metric::ScaleInvariant => {
                // Whitened by the QR factors the metric is Euclidean and the vertical
                // vector of Λ is (Q_G Φ, −Q_H T Φᵀ T⁻¹) with Φ = R_G Λ R_G⁻¹, T = R_H R_Gᵀ.
                // In the singular bases of T each entry of Φ is a separate 2-term least
                // squares problem. Equivalent to Λᵀ C + C Λᵀ = (GᵀG) Hᵀη_H − η_GᵀG (HᵀH),
                // C = (GᵀG)(HᵀH), without forming the Gram products.
                let f = x.frame();
                let a = mul_tn(&f.q, &mul(&right_solve(&f.r_g, &mul_tn(&f.q_g, &v.g))?, &f.q));
                let b = mul_tn(&f.p, &mul(&right_solve(&f.r_h, &mul_tn(&f.q_h, &v.h))?, &f.p));
                let r = x.rank();
                let mut phi = DMatrix::zeros(r, r);
                let mut m = DMatrix::zeros(r, r);
                for l in 0..r {
                    for k in 0..r {
                        let w = f.sigma[l] / f.sigma[k];
                        let c = (a[(k, l)] - w * b[(l, k)]) / (1.0 + w * w);
                        phi[(k, l)] = c;
                        m[(l, k)] = w * c;
                    }
                }
                let vg = mul(&mul(&f.q_g, &mul_nt(&mul(&f.q, &phi), &f.q)), &f.r_g);
                let vh = mul(&mul(&f.q_h, &mul_nt(&mul(&f.p, &m), &f.p)), &f.r_h);
                Ok(TangentGh { g: &v.g - vg, h: &v.h + vh })
            }
            Metric::Euclidean => {
                // (GᵀG) Λ + Λ (HᵀH) = η_HᵀH − Gᵀη_G
                let q = mul_tn(&v.h, &x.h) - mul_tn(&x.g, &v.g);
                let lambda = linalg::solve_sylvester_spd(&x.gram_g, &x.gram_h, &q)?;
                Ok(TangentGh { g: &v.g + mul(&x.g, &lambda), h: &v.h - mul_nt(&x.h, &lambda) })
            }
        }
    }

    fn retract(&self, x: &PointGh, v: &TangentGh) -> Result<PointGh> {
        PointGh::new(&x.g + &v.g, &x.h + &v.h)
    }

    fn rgrad_from_partials(&self, x: &PointGh, p: &TangentGh) -> TangentGh {
        match self.metric {
            Metric::ScaleInvariant => TangentGh { g: mul(&p.g, x.gram_g.matrix()), h: mul(&p.h, x.gram_h.matrix()) },
            Metric::Euclidean => p.clone(),
        }
    }

    fn hess_apply(&self, x: &PointGh, xi: &TangentGh, p: &TangentGh, dp: &TangentGh) -> Result<TangentGh> {
        let out = match self.metric {
            Metric::ScaleInvariant => {
                let grad = self.rgrad_from_partials(x, p);
                let slot = |f: &DMatrix<f64>, gram: &SpdMatrix, phi: &DMatrix<f64>, dphi: &DMatrix<f64>, xi: &DMatrix<f64>, grad: &DMatrix<f64>| {
                    let dgrad = mul(dphi, gram.matrix()) + mul(phi, &linalg::sym(&mul_tn(f, xi))) * 2.0;
                    dgrad + connection_term(f, gram, xi, grad)
                };
                TangentGh {
                    g: slot(&x.g, &x.gram_g, &p.g, &dp.g, &xi.g, &grad.g),
                    h: slot(&x.h, &x.gram_h, &p.h, &dp.h, &xi.h, &grad.h),
                }
            }
            Metric::Euclidean => dp.clone(),
        };
        self.pi_project(x, &out)
    }

    fn partials_pairing(&self, _x: &PointGh, p: &TangentGh, v: &TangentGh) -> f64 {
        p.euclidean_inner(v)
    }

    fn random_ambient(&self, x: &PointGh, rng: &mut Rng) -> TangentGh {
        TangentGh { g: rng::gaussian(rng, x.g.nrows(), x.rank()), h: rng::gaussian(rng, x.h.nrows(), x.rank()) }
    }

    fn vertical_basis(&self, x: &PointGh) -> Vec<TangentGh> {
        full_basis(x.rank())
            .into_iter()
            .map(|e| TangentGh { g: -mul(&x.g, &e), h: mul_nt(&x.h, &e) })
            .collect()
    }

    fn random_group_element(&self, x: &PointGh, rng: &mut Rng) -> Option<DMatrix<f64>> {
        Some(rng::invertible(rng, x.rank(), 10.0))
    }

    /// `(G M⁻¹, H Mᵀ)`
    fn act_point(&self, x: &PointGh, m: &DMatrix<f64>) -> PointGh {
        let minv = m.clone().try_inverse().expect("group element must be invertible");
        PointGh::new(mul(&x.g, &minv), mul_nt(&x.h, m)).expect("group action preserves rank")
    }

    fn act_vector(&self, _x: &PointGh, v: &TangentGh, m: &DMatrix<f64>) -> TangentGh {
        let minv = m.clone().try_inverse().expect("group element must be invertible");
        TangentGh { g: mul(&v.g, &minv), h: mul_nt(&v.h, m) }
    }

    fn to_dense(&self, x: &PointGh) -> DMatrix<f64> {
        crate::opcount::note_ambient_dense();
        mul_nt(&x.g, &x.h)
    }

    fn differential_dense(&self, x: &PointGh, v: &TangentGh) -> DMatrix<f64> {
        mul_nt(&v.g, &x.h) + mul_nt(&x.g, &v.h)
    }
}

/// Residual of the horizontal characterization `ξ_Gᵀ G (HᵀH) = (GᵀG) Hᵀ ξ_H`.
pub fn horizontality_defect(x: &PointGh, v: &TangentGh) -> f64 {
    let lhs = mul(&mul_tn(&v.g, &x.g), x.gram_h.matrix());
    let rhs = mul(x.gram_g.matrix(), &mul_tn(&x.h, &v.h));
    (lhs - rhs).amax()
}
