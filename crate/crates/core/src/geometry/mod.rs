//! The four factorizations of a rank-r matrix.

pub mod embedded;
pub mod euclidean;
pub mod fullrank;
pub mod polar;
pub mod subspace;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, mul, mul_tn};

pub use embedded::{AmbientGradient, Embedded, PointUsv, TangentUsv};
pub use euclidean::Euclidean;
pub use fullrank::{FullRank, PointGh, TangentGh};
pub use polar::{BMode, Polar, PointUbv, TangentUbv};
pub use subspace::{PointUy, Subspace, TangentUy};

/// Orthonormality tolerance for Stiefel factors.
pub const ORTHO_TOL: f64 = 1e-12;

/// Metric used by the full-rank and subspace factorizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    /// Invariant to the change of coordinates along the fiber.
    #[default]
    ScaleInvariant,
    /// Plain Frobenius pairing on every factor.
    Euclidean,
}

/// `Z − U Sym(UᵀZ)`: projection onto the tangent space of the Stiefel manifold at `U`.
pub fn stiefel_project(u: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    z - mul(u, &linalg::sym(&mul_tn(u, z)))
}

/// `Z − U UᵀZ`
pub fn orth_complement(u: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    z - mul(u, &mul_tn(u, z))
}

pub(crate) fn check_orthonormal(u: &DMatrix<f64>) -> Result<()> {
    linalg::ensure_finite(u, "orthonormal factor")?;
    let defect = linalg::orthonormality_defect(u);
    if defect > ORTHO_TOL {
        return Err(Error::NotOrthonormal { defect });
    }
    Ok(())
}

pub(crate) fn check_rank_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!("factor ranks differ: {} vs {}", a.ncols(), b.ncols())));
    }
    if a.ncols() == 0 {
        return Err(Error::Shape("rank must be positive".into()));
    }
    Ok(())
}

/// Elementary skew-symmetric matrices `E_ij − E_ji`, `i < j`.
pub(crate) fn skew_basis(r: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..r {
        for j in i + 1..r {
            let mut e = DMatrix::zeros(r, r);
            e[(i, j)] = 1.0;
            e[(j, i)] = -1.0;
            out.push(e);
        }
    }
    out
}

/// All elementary matrices `E_ij`.
pub(crate) fn full_basis(r: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for j in 0..r {
        for i in 0..r {
            let mut e = DMatrix::zeros(r, r);
            e[(i, j)] = 1.0;
            out.push(e);
        }
    }
    out
}
