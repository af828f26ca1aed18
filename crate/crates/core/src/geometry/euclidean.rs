//! Flat `R^{m×n}` with the Frobenius metric. Used to exercise the solvers on
//! problems whose answers are known in closed form.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::manifold::{Geometry, TangentVector};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Geometry for Euclidean {
    type Point = DMatrix<f64>;
    type Vector = DMatrix<f64>;
    type Partials = DMatrix<f64>;

    fn name(&self) -> &'static str {
        "euclidean"
    }

    fn metric(&self, _x: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.euclidean_inner(b)
    }

    fn psi_project(&self, _x: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
        z.clone()
    }

    fn pi_project(&self, _x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(v.clone())
    }

    fn retract(&self, x: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(x + v)
    }

    fn rgrad_from_partials(&self, _x: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
        p.clone()
    }

    fn hess_apply(&self, _x: &DMatrix<f64>, _xi: &DMatrix<f64>, _p: &DMatrix<f64>, dp: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(dp.clone())
    }

    fn partials_pairing(&self, _x: &DMatrix<f64>, p: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
        p.euclidean_inner(v)
    }

    fn random_ambient(&self, x: &DMatrix<f64>, rng: &mut Rng) -> DMatrix<f64> {
        rng::gaussian(rng, x.nrows(), x.ncols())
    }

    fn to_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        x.clone()
    }

    fn differential_dense(&self, _x: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
        v.clone()
    }
}
