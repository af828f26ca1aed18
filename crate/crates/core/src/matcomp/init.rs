//! Spectral initialization from the dominant singular triplets of `P_Ω(W★)`.

use nalgebra::DMatrix;

use super::CompletionProblem;
use crate::error::{Error, Result};
use crate::geometry::{PointGh, PointUbv, PointUsv, PointUy};
use crate::linalg::{self, ThinSvd, RANK_TOL};
use crate::point::{FactoredPoint, GeometryKind};
use crate::rng;
use crate::sparse::SampledMatrix;

const OVERSAMPLE: usize = 8;
const MAX_SWEEPS: usize = 300;
const SWEEP_TOL: f64 = 1e-10;
const INIT_SEED: u64 = 0x5eed_5eed;

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let k = m.ncols();
    crate::opcount::add(2 * m.nrows() * k * k);
    let q = m.qr().q();
    q.columns(0, k).into_owned()
}

/// Top `r` singular triplets of a sparse matrix by block subspace iteration,
/// never forming the dense matrix.
pub fn spectral_svd(a: &SampledMatrix, r: usize) -> Result<ThinSvd> {
    let (d1, d2) = a.shape();
    if r == 0 || r > d1.min(d2) {
        return Err(Error::Shape(format!("rank {r} for a {d1}×{d2} matrix")));
    }
    let k = (r + OVERSAMPLE).min(d1).min(d2);
    let mut g = rng::stream(INIT_SEED, 0);
    let mut right = rng::orthonormal(&mut g, d2, k);
    let mut a_right = a.mul_dense(&right);
    let mut best = None;
    for _ in 0..MAX_SWEEPS {
        let q = orthonormalize(a_right);
        // Aᵀ Q = U S Vᵀ gives A ≈ Q Qᵀ A = (Q V) S Uᵀ
        let svd = linalg::thin_svd(&a.tr_mul_dense(&q), k)?;
        let left = linalg::mul(&q, &svd.v);
        right = svd.u;
        a_right = a.mul_dense(&right);
        // ‖A v_j − σ_j u_j‖ over the leading r triplets
        let residual = (0..r)
            .map(|j| (a_right.column(j) - left.column(j) * svd.s[j]).norm())
            .fold(0.0, f64::max);
        let done = residual <= SWEEP_TOL * svd.s[0];
        best = Some(ThinSvd { u: left, s: svd.s, v: right.clone() });
        if done {
            break;
        }
    }
    let full = best.expect("at least one sweep");
    let mut u = full.u.columns(0, r).into_owned();
    let mut v = full.v.columns(0, r).into_owned();
    linalg::normalize_svd_signs(&mut u, &mut v);
    Ok(ThinSvd { u, s: full.s.rows(0, r).into_owned(), v })
}

/// Rank-r spectral estimate of `W★`, packaged for the requested geometry.
///
/// The singular values are rescaled by `d1 d2 / |Ω|` so that the estimate is
/// unbiased under uniform sampling.
pub fn init_spectral(problem: &CompletionProblem, kind: GeometryKind) -> Result<FactoredPoint> {
    let r = problem.rank();
    let train = problem.train();
    let svd = spectral_svd(train, r)?;
    let (sigma_1, sigma_r) = (svd.s[0], svd.s[r - 1]);
    if !(sigma_r > RANK_TOL * sigma_1) {
        return Err(Error::RankDeficientData { sigma_r });
    }
    let (d1, d2) = train.shape();
    let scale = (d1 * d2) as f64 / train.nnz() as f64;
    let s = svd.s.map(|x| x * scale);
    let scale_cols = |m: &DMatrix<f64>, f: &dyn Fn(f64) -> f64| DMatrix::from_fn(m.nrows(), r, |i, j| m[(i, j)] * f(s[j]));
    Ok(match kind {
        GeometryKind::Gh | GeometryKind::GhEuclidean => {
            FactoredPoint::Gh(PointGh::new(scale_cols(&svd.u, &f64::sqrt), scale_cols(&svd.v, &f64::sqrt))?)
        }
        GeometryKind::Ubv | GeometryKind::UbvDiag => {
            FactoredPoint::Ubv(PointUbv::new(svd.u, DMatrix::from_diagonal(&s), svd.v)?)
        }
        GeometryKind::Uy | GeometryKind::UyEuclidean => {
            FactoredPoint::Uy(PointUy::new(svd.u, scale_cols(&svd.v, &|x| x))?)
        }
        GeometryKind::Embedded => FactoredPoint::Usv(PointUsv::new(svd.u, s, svd.v)?),
    })
}
