//! Geometry tags and a geometry-erased point type for I/O and orchestration.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    BMode, Embedded, FullRank, Polar, PointGh, PointUbv, PointUsv, PointUy, Subspace,
};
use crate::manifold::Geometry;

/// Every geometry the harness can run, including the metric ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    Gh,
    Ubv,
    Uy,
    Embedded,
    GhEuclidean,
    UyEuclidean,
    UbvDiag,
}

impl GeometryKind {
    pub const ALL: [GeometryKind; 7] = [
        GeometryKind::Gh,
        GeometryKind::Ubv,
        GeometryKind::Uy,
        GeometryKind::Embedded,
        GeometryKind::GhEuclidean,
        GeometryKind::UyEuclidean,
        GeometryKind::UbvDiag,
    ];

    /// The four main geometries, without ablations.
    pub const MAIN: [GeometryKind; 4] = [GeometryKind::Gh, GeometryKind::Ubv, GeometryKind::Uy, GeometryKind::Embedded];

    pub fn as_str(self) -> &'static str {
        match self {
            GeometryKind::Gh => "gh",
            GeometryKind::Ubv => "ubv",
            GeometryKind::Uy => "uy",
            GeometryKind::Embedded => "embedded",
            GeometryKind::GhEuclidean => "gh-euclidean",
            GeometryKind::UyEuclidean => "uy-euclidean",
            GeometryKind::UbvDiag => "ubv-diag",
        }
    }

    /// Factor names in checkpoint order.
    pub fn factor_names(self) -> &'static [&'static str] {
        match self {
            GeometryKind::Gh | GeometryKind::GhEuclidean => &["g", "h"],
            GeometryKind::Ubv | GeometryKind::UbvDiag => &["u", "b", "v"],
            GeometryKind::Uy | GeometryKind::UyEuclidean => &["u", "y"],
            GeometryKind::Embedded => &["u", "s", "v"],
        }
    }
}

impl fmt::Display for GeometryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for GeometryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GeometryKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown geometry `{s}`")))
    }
}

/// A rank-r matrix in one of the four factored forms.
#[derive(Debug, Clone)]
pub enum FactoredPoint {
    Gh(PointGh),
    Ubv(PointUbv),
    Uy(PointUy),
    Usv(PointUsv),
}

impl FactoredPoint {
    pub fn rank(&self) -> usize {
        match self {
            FactoredPoint::Gh(p) => p.rank(),
            FactoredPoint::Ubv(p) => p.rank(),
            FactoredPoint::Uy(p) => p.rank(),
            FactoredPoint::Usv(p) => p.rank(),
        }
    }

    /// Factor matrices in the order of [`GeometryKind::factor_names`]; singular
    /// values are returned as a column.
    pub fn factors(&self) -> Vec<DMatrix<f64>> {
        match self {
            FactoredPoint::Gh(p) => vec![p.g().clone(), p.h().clone()],
            FactoredPoint::Ubv(p) => vec![p.u().clone(), p.b().matrix().clone(), p.v().clone()],
            FactoredPoint::Uy(p) => vec![p.u().clone(), p.y().clone()],
            FactoredPoint::Usv(p) => {
                vec![p.u().clone(), DMatrix::from_column_slice(p.rank(), 1, p.s().as_slice()), p.v().clone()]
            }
        }
    }

    /// Rebuilds a point from factors listed as in [`factors`](FactoredPoint::factors).
    pub fn from_factors(kind: GeometryKind, mut f: Vec<DMatrix<f64>>) -> Result<Self> {
        let want = kind.factor_names().len();
        if f.len() != want {
            return Err(Error::Shape(format!("{kind} needs {want} factors, got {}", f.len())));
        }
        let mut next = || f.remove(0);
        Ok(match kind {
            GeometryKind::Gh | GeometryKind::GhEuclidean => FactoredPoint::Gh(PointGh::new(next(), next())?),
            GeometryKind::Ubv | GeometryKind::UbvDiag => {
                FactoredPoint::Ubv(PointUbv::new(next(), next(), next())?)
            }
            GeometryKind::Uy | GeometryKind::UyEuclidean => FactoredPoint::Uy(PointUy::new(next(), next())?),
            GeometryKind::Embedded => {
                let u = next();
                let s = next();
                if s.ncols() != 1 {
                    return Err(Error::Shape(format!("singular values must be a column, got {:?}", s.shape())));
                }
                let s = DVector::from_column_slice(s.as_slice());
                FactoredPoint::Usv(PointUsv::new(u, s, next())?)
            }
        })
    }

    /// Dense `d1 × d2` matrix. Small problems and tests only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            FactoredPoint::Gh(p) => FullRank::default().to_dense(p),
            FactoredPoint::Ubv(p) => Polar::default().to_dense(p),
            FactoredPoint::Uy(p) => Subspace::default().to_dense(p),
            FactoredPoint::Usv(p) => Embedded.to_dense(p),
        }
    }
}

/// Geometries whose points can be moved in and out of [`FactoredPoint`].
pub trait Factored: Geometry {
    fn wrap(&self, x: Self::Point) -> FactoredPoint;
    fn unwrap(&self, x: FactoredPoint) -> Result<Self::Point>;
}

fn mismatch(want: &str) -> Error {
    Error::Invalid(format!("point is not in {want} form"))
}

impl Factored for FullRank {
    fn wrap(&self, x: PointGh) -> FactoredPoint {
        FactoredPoint::Gh(x)
    }
    fn unwrap(&self, x: FactoredPoint) -> Result<PointGh> {
        match x {
            FactoredPoint::Gh(p) => Ok(p),
            _ => Err(mismatch("G Hᵀ")),
        }
    }
}

impl Factored for Polar {
    fn wrap(&self, x: PointUbv) -> FactoredPoint {
        FactoredPoint::Ubv(x)
    }
    fn unwrap(&self, x: FactoredPoint) -> Result<PointUbv> {
        match x {
            FactoredPoint::Ubv(p) => {
                if self.b_mode == BMode::Diagonal && (p.b().matrix() - crate::linalg::diag_part(p.b().matrix())).amax() > 0.0 {
                    return Err(Error::Invalid("diagonal mode needs a diagonal B".into()));
                }
                Ok(p)
            }
            _ => Err(mismatch("U B Vᵀ")),
        }
    }
}

impl Factored for Subspace {
    fn wrap(&self, x: PointUy) -> FactoredPoint {
        FactoredPoint::Uy(x)
    }
    fn unwrap(&self, x: FactoredPoint) -> Result<PointUy> {
        match x {
            FactoredPoint::Uy(p) => Ok(p),
            _ => Err(mismatch("U Yᵀ")),
        }
    }
}

impl Factored for Embedded {
    fn wrap(&self, x: PointUsv) -> FactoredPoint {
        FactoredPoint::Usv(x)
    }
    fn unwrap(&self, x: FactoredPoint) -> Result<PointUsv> {
        match x {
            FactoredPoint::Usv(p) => Ok(p),
            _ => Err(mismatch("U Σ Vᵀ")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn kinds_round_trip_through_strings() {
        for k in GeometryKind::ALL {
            assert_eq!(k.as_str().parse::<GeometryKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.as_str()));
        }
        assert!("gl".parse::<GeometryKind>().is_err());
    }

    #[test]
    fn factors_round_trip() {
        let mut g = rng::stream(1, 0);
        let u = rng::orthonormal(&mut g, 5, 2);
        let v = rng::orthonormal(&mut g, 4, 2);
        let p = FactoredPoint::Usv(PointUsv::new(u, DVector::from_vec(vec![3.0, 1.0]), v).unwrap());
        let back = FactoredPoint::from_factors(GeometryKind::Embedded, p.factors()).unwrap();
        assert!((back.to_dense() - p.to_dense()).amax() < 1e-15);
        assert!(FactoredPoint::from_factors(GeometryKind::Gh, p.factors()).is_err());
    }
}
