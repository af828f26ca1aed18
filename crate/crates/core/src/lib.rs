//! Optimization on the manifold of fixed-rank matrices.
//!
//! Three quotient geometries (`GHᵀ`, `UBVᵀ`, `UYᵀ`) and the embedded
//! geometry (`UΣVᵀ`) share one [`Geometry`] contract. Geometry-agnostic
//! gradient descent and trust-region solvers run on any of them, and the
//! [`matcomp`] module instantiates everything on low-rank matrix completion.

pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod manifold;
pub mod matcomp;
pub mod opcount;
pub mod point;
pub mod rng;
pub mod solvers;
pub mod sparse;

pub use error::{Error, Result};
pub use manifold::{Geometry, Objective, TangentVector};
pub use point::{FactoredPoint, GeometryKind};
