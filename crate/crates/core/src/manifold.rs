//! The geometry contract shared by every factorization, and the objective
//! interface the solvers consume.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::rng::Rng;

/// Linear structure of factor-wise tangent representations.
pub trait TangentVector: Clone + Send + Sync + std::fmt::Debug {
    fn zeros_like(&self) -> Self;
    /// `self += a · x`
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale_mut(&mut self, a: f64);
    /// Plain Frobenius pairing summed over factors.
    fn euclidean_inner(&self, other: &Self) -> f64;
    fn max_abs(&self) -> f64;

    fn scaled(&self, a: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(a);
        out
    }

    fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    fn is_finite(&self) -> bool {
        self.max_abs().is_finite()
    }
}

impl TangentVector for DMatrix<f64> {
    fn zeros_like(&self) -> Self {
        DMatrix::zeros(self.nrows(), self.ncols())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        crate::opcount::add(self.len());
        self.zip_apply(x, |s, v| *s += a * v);
    }
    fn scale_mut(&mut self, a: f64) {
        nalgebra::Matrix::scale_mut(self, a);
    }
    fn euclidean_inner(&self, other: &Self) -> f64 {
        crate::linalg::inner(self, other)
    }
    fn max_abs(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else if self.iter().any(|x| !x.is_finite()) {
            f64::NAN
        } else {
            self.amax()
        }
    }
}

/// Declares a struct of named `DMatrix` factors with the [`TangentVector`] operations.
#[macro_export]
macro_rules! factor_tuple {
    ($(#[$meta:meta])* $name:ident { $($field:ident),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            $(pub $field: nalgebra::DMatrix<f64>,)+
        }

        impl $crate::manifold::TangentVector for $name {
            fn zeros_like(&self) -> Self {
                $name { $($field: nalgebra::DMatrix::zeros(self.$field.nrows(), self.$field.ncols()),)+ }
            }
            fn axpy(&mut self, a: f64, x: &Self) {
                $($crate::manifold::TangentVector::axpy(&mut self.$field, a, &x.$field);)+
            }
            fn scale_mut(&mut self, a: f64) {
                $(self.$field.scale_mut(a);)+
            }
            fn euclidean_inner(&self, other: &Self) -> f64 {
                0.0 $(+ $crate::linalg::inner(&self.$field, &other.$field))+
            }
            fn max_abs(&self) -> f64 {
                let mut m = 0.0f64;
                $(
                    let f = $crate::manifold::TangentVector::max_abs(&self.$field);
                    if !f.is_finite() {
                        return f64::NAN;
                    }
                    m = m.max(f);
                )+
                m
            }
        }
    };
}

/// Geometric operations on one matrix factorization.
///
/// Tangent vectors are stored factor-wise in the total space. A vector is a
/// valid *horizontal lift* once it has gone through [`psi_project`] (onto the
/// total-space tangent space) and [`pi_project`] (onto the horizontal space).
///
/// [`psi_project`]: Geometry::psi_project
/// [`pi_project`]: Geometry::pi_project
pub trait Geometry: Send + Sync {
    type Point: Clone + Send + Sync + std::fmt::Debug;
    type Vector: TangentVector;
    /// Euclidean partial derivatives of a cost, in whatever form the geometry consumes.
    type Partials: Send + Sync;

    fn name(&self) -> &'static str;

    fn metric(&self, x: &Self::Point, a: &Self::Vector, b: &Self::Vector) -> f64;

    fn norm(&self, x: &Self::Point, a: &Self::Vector) -> f64 {
        self.metric(x, a, a).max(0.0).sqrt()
    }

    /// Projection of an ambient factor tuple onto the total-space tangent space.
    fn psi_project(&self, x: &Self::Point, z: &Self::Vector) -> Self::Vector;

    /// Metric-orthogonal projection of a tangent vector onto the horizontal space.
    fn pi_project(&self, x: &Self::Point, v: &Self::Vector) -> Result<Self::Vector>;

    fn retract(&self, x: &Self::Point, v: &Self::Vector) -> Result<Self::Point>;

    /// Riemannian gradient from Euclidean partial derivatives.
    fn rgrad_from_partials(&self, x: &Self::Point, partials: &Self::Partials) -> Self::Vector;

    /// Horizontal lift of the Riemannian Hessian applied to `xi`.
    ///
    /// `dpartials` is the Euclidean directional derivative of `partials` along `xi`.
    fn hess_apply(
        &self,
        x: &Self::Point,
        xi: &Self::Vector,
        partials: &Self::Partials,
        dpartials: &Self::Partials,
    ) -> Result<Self::Vector>;

    /// Euclidean directional derivative `Dφ(x)[v]` expressed through the partials.
    fn partials_pairing(&self, x: &Self::Point, partials: &Self::Partials, v: &Self::Vector) -> f64;

    /// A Gaussian perturbation with the shapes of the factors at `x`.
    fn random_ambient(&self, x: &Self::Point, rng: &mut Rng) -> Self::Vector;

    /// A random horizontal vector: Gaussian ambient, then Ψ, then Π.
    fn random_horizontal(&self, x: &Self::Point, rng: &mut Rng) -> Result<Self::Vector> {
        let z = self.random_ambient(x, rng);
        self.pi_project(x, &self.psi_project(x, &z))
    }

    /// A spanning set of the vertical space at `x`, empty when the fiber is discrete.
    fn vertical_basis(&self, _x: &Self::Point) -> Vec<Self::Vector> {
        Vec::new()
    }

    /// A Gaussian combination of [`vertical_basis`](Geometry::vertical_basis).
    fn random_vertical(&self, x: &Self::Point, rng: &mut Rng) -> Self::Vector {
        use rand_distr::{Distribution, StandardNormal};
        let mut out = self.random_ambient(x, rng).zeros_like();
        for v in self.vertical_basis(x) {
            let c: f64 = StandardNormal.sample(rng);
            out.axpy(c, &v);
        }
        out
    }

    /// A random element of the symmetry group acting on the fibers, if any.
    fn random_group_element(&self, _x: &Self::Point, _rng: &mut Rng) -> Option<DMatrix<f64>> {
        None
    }

    fn act_point(&self, x: &Self::Point, _m: &DMatrix<f64>) -> Self::Point {
        x.clone()
    }

    fn act_vector(&self, _x: &Self::Point, v: &Self::Vector, _m: &DMatrix<f64>) -> Self::Vector {
        v.clone()
    }

    /// Dense `d1 × d2` product represented by `x`. Tests and small problems only.
    fn to_dense(&self, x: &Self::Point) -> DMatrix<f64>;

    /// Dense differential of the factor product at `x` along `v`. Tests only.
    fn differential_dense(&self, x: &Self::Point, v: &Self::Vector) -> DMatrix<f64>;
}

/// A smooth cost on the total space that is invariant along the fibers.
pub trait Objective<G: Geometry>: Sync {
    /// Data computed once per point and reused by partials and Hessian products.
    type State: Send + Sync;

    fn cost(&self, x: &G::Point) -> f64;

    /// Cost plus per-point state.
    fn prepare(&self, x: &G::Point) -> (f64, Self::State);

    fn partials(&self, x: &G::Point, state: &Self::State) -> G::Partials;

    /// Directional derivative of the partials along `xi`.
    fn directional_partials(&self, x: &G::Point, state: &Self::State, xi: &G::Vector) -> G::Partials;
}

/// Cost, partials and Riemannian gradient at one point.
pub struct FirstOrder<G: Geometry, O: Objective<G>> {
    pub cost: f64,
    pub state: O::State,
    pub partials: G::Partials,
    pub grad: G::Vector,
    pub grad_norm: f64,
}

pub fn first_order<G: Geometry, O: Objective<G>>(geom: &G, obj: &O, x: &G::Point) -> FirstOrder<G, O> {
    let (cost, state) = obj.prepare(x);
    let partials = obj.partials(x, &state);
    let grad = geom.rgrad_from_partials(x, &partials);
    let grad_norm = geom.norm(x, &grad);
    FirstOrder { cost, state, partials, grad, grad_norm }
}

/// Riemannian Hessian of `obj` at `x` applied to `xi`.
pub fn hessian_vector<G: Geometry, O: Objective<G>>(
    geom: &G,
    obj: &O,
    x: &G::Point,
    fo: &FirstOrder<G, O>,
    xi: &G::Vector,
) -> Result<G::Vector> {
    let dp = obj.directional_partials(x, &fo.state, xi);
    geom.hess_apply(x, xi, &fo.partials, &dp)
}
