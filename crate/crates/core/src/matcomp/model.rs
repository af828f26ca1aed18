//! Per-geometry sampling of the factor product and its partial derivatives.

use nalgebra::DMatrix;

use crate::geometry::{
    AmbientGradient, Embedded, FullRank, PointGh, PointUbv, PointUsv, PointUy, Polar, Subspace, TangentGh,
    TangentUbv, TangentUsv, TangentUy,
};
use crate::linalg::{mul, mul_tn};
use crate::manifold::Geometry;
use crate::sparse::{SampledMatrix, SparsePattern};

/// A geometry whose points are matrix factorizations that can be evaluated
/// entrywise on an index set.
///
/// All methods are associated functions: the sampled values depend only on
/// the factors, not on the metric or the other geometry settings.
pub trait CompletionModel: Geometry {
    /// `W_ij` for every `(i, j)` in the pattern.
    fn sample(x: &Self::Point, pattern: &SparsePattern) -> Vec<f64>;

    /// `DW(x)[ξ]_ij` on the pattern.
    fn sample_tangent(x: &Self::Point, xi: &Self::Vector, pattern: &SparsePattern) -> Vec<f64>;

    /// Euclidean partials of the cost from `S = ∂φ/∂W`.
    fn partials(x: &Self::Point, s: &SampledMatrix) -> Self::Partials;

    /// Directional derivative of [`partials`](CompletionModel::partials) along
    /// `ξ`, with `sstar` the directional derivative of `S`.
    fn directional_partials(x: &Self::Point, xi: &Self::Vector, s: &SampledMatrix, sstar: &SampledMatrix)
        -> Self::Partials;

    /// Coefficients `c_k` (ascending in `k`) of the entries of the factor
    /// product along the straight line `x + s ξ` in the total space, sampled on
    /// the pattern.
    fn line_coefficients(x: &Self::Point, xi: &Self::Vector, pattern: &SparsePattern) -> Vec<Vec<f64>>;
}

fn two_factor_line(a: &DMatrix<f64>, b: &DMatrix<f64>, da: &DMatrix<f64>, db: &DMatrix<f64>, p: &SparsePattern) -> Vec<Vec<f64>> {
    vec![p.sample_product(a, b), p.sample_sum(&[(da, b), (a, db)]), p.sample_product(da, db)]
}

impl CompletionModel for FullRank {
    fn sample(x: &PointGh, p: &SparsePattern) -> Vec<f64> {
        p.sample_product(x.g(), x.h())
    }

    fn sample_tangent(x: &PointGh, xi: &TangentGh, p: &SparsePattern) -> Vec<f64> {
        p.sample_sum(&[(&xi.g, x.h()), (x.g(), &xi.h)])
    }

    fn partials(x: &PointGh, s: &SampledMatrix) -> TangentGh {
        TangentGh { g: s.mul_dense(x.h()), h: s.tr_mul_dense(x.g()) }
    }

    fn directional_partials(x: &PointGh, xi: &TangentGh, s: &SampledMatrix, sstar: &SampledMatrix) -> TangentGh {
        TangentGh {
            g: sstar.mul_dense(x.h()) + s.mul_dense(&xi.h),
            h: sstar.tr_mul_dense(x.g()) + s.tr_mul_dense(&xi.g),
        }
    }

    fn line_coefficients(x: &PointGh, xi: &TangentGh, p: &SparsePattern) -> Vec<Vec<f64>> {
        two_factor_line(x.g(), x.h(), &xi.g, &xi.h, p)
    }
}

impl CompletionModel for Subspace {
    fn sample(x: &PointUy, p: &SparsePattern) -> Vec<f64> {
        p.sample_product(x.u(), x.y())
    }

    fn sample_tangent(x: &PointUy, xi: &TangentUy, p: &SparsePattern) -> Vec<f64> {
        p.sample_sum(&[(&xi.u, x.y()), (x.u(), &xi.y)])
    }

    fn partials(x: &PointUy, s: &SampledMatrix) -> TangentUy {
        TangentUy { u: s.mul_dense(x.y()), y: s.tr_mul_dense(x.u()) }
    }

    fn directional_partials(x: &PointUy, xi: &TangentUy, s: &SampledMatrix, sstar: &SampledMatrix) -> TangentUy {
        TangentUy {
            u: sstar.mul_dense(x.y()) + s.mul_dense(&xi.y),
            y: sstar.tr_mul_dense(x.u()) + s.tr_mul_dense(&xi.u),
        }
    }

    fn line_coefficients(x: &PointUy, xi: &TangentUy, p: &SparsePattern) -> Vec<Vec<f64>> {
        two_factor_line(x.u(), x.y(), &xi.u, &xi.y, p)
    }
}

impl CompletionModel for Polar {
    fn sample(x: &PointUbv, p: &SparsePattern) -> Vec<f64> {
        p.sample_product(&mul(x.u(), x.b().matrix()), x.v())
    }

    fn sample_tangent(x: &PointUbv, xi: &TangentUbv, p: &SparsePattern) -> Vec<f64> {
        let b = x.b().matrix();
        let left = mul(&xi.u, b) + mul(x.u(), &xi.b);
        p.sample_sum(&[(&left, x.v()), (&mul(x.u(), b), &xi.v)])
    }

    fn partials(x: &PointUbv, s: &SampledMatrix) -> TangentUbv {
        let b = x.b().matrix();
        let sv = s.mul_dense(x.v());
        let stu = s.tr_mul_dense(x.u());
        TangentUbv { u: mul(&sv, b), b: mul_tn(x.u(), &sv), v: mul(&stu, b) }
    }

    fn directional_partials(x: &PointUbv, xi: &TangentUbv, s: &SampledMatrix, sstar: &SampledMatrix) -> TangentUbv {
        let b = x.b().matrix();
        let (u, v) = (x.u(), x.v());
        let sv = s.mul_dense(v);
        let stu = s.tr_mul_dense(u);
        let dsv = sstar.mul_dense(v) + s.mul_dense(&xi.v);
        let dstu = sstar.tr_mul_dense(u) + s.tr_mul_dense(&xi.u);
        TangentUbv {
            u: mul(&dsv, b) + mul(&sv, &xi.b),
            b: mul_tn(&xi.u, &sv) + mul_tn(u, &dsv),
            v: mul(&dstu, b) + mul(&stu, &xi.b),
        }
    }

    fn line_coefficients(x: &PointUbv, xi: &TangentUbv, p: &SparsePattern) -> Vec<Vec<f64>> {
        let b = x.b().matrix();
        let (u, v) = (x.u(), x.v());
        let p0 = mul(u, b);
        let p1 = mul(&xi.u, b) + mul(u, &xi.b);
        let p2 = mul(&xi.u, &xi.b);
        vec![
            p.sample_product(&p0, v),
            p.sample_sum(&[(&p0, &xi.v), (&p1, v)]),
            p.sample_sum(&[(&p1, &xi.v), (&p2, v)]),
            p.sample_product(&p2, &xi.v),
        ]
    }
}

impl CompletionModel for Embedded {
    fn sample(x: &PointUsv, p: &SparsePattern) -> Vec<f64> {
        let us = DMatrix::from_fn(x.u().nrows(), x.rank(), |i, j| x.u()[(i, j)] * x.s()[j]);
        p.sample_product(&us, x.v())
    }

    fn sample_tangent(x: &PointUsv, xi: &TangentUsv, p: &SparsePattern) -> Vec<f64> {
        let left = mul(x.u(), &xi.n) + &xi.up;
        p.sample_sum(&[(&left, x.v()), (x.u(), &xi.vp)])
    }

    fn partials(_x: &PointUsv, s: &SampledMatrix) -> AmbientGradient {
        AmbientGradient::Sparse(s.clone())
    }

    fn directional_partials(_x: &PointUsv, _xi: &TangentUsv, _s: &SampledMatrix, sstar: &SampledMatrix) -> AmbientGradient {
        AmbientGradient::Sparse(sstar.clone())
    }

    fn line_coefficients(x: &PointUsv, xi: &TangentUsv, p: &SparsePattern) -> Vec<Vec<f64>> {
        vec![Self::sample(x, p), Self::sample_tangent(x, xi, p)]
    }
}
