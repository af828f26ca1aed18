//! Seeded, splittable random streams. All randomness in the crate is drawn
//! from generators built here; there is no global RNG.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn gaussian(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Gaussian matrix with orthonormal columns.
pub fn orthonormal(rng: &mut Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let g = gaussian(rng, rows, cols);
    g.qr().q().columns(0, cols).into_owned()
}

/// Random orthogonal `r × r` matrix.
pub fn orthogonal(rng: &mut Rng, r: usize) -> DMatrix<f64> {
    orthonormal(rng, r, r)
}

pub fn skew(rng: &mut Rng, r: usize) -> DMatrix<f64> {
    let a = gaussian(rng, r, r);
    (&a - a.transpose()) * 0.5
}

/// Random symmetric positive definite matrix with eigenvalues in `[lo, hi]`.
pub fn spd(rng: &mut Rng, r: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    use rand::Rng as _;
    let q = orthogonal(rng, r);
    let d = DMatrix::from_fn(r, 1, |_, _| rng.random_range(lo..=hi));
    let qd = DMatrix::from_fn(r, r, |i, j| q[(i, j)] * d[j]);
    let m = &qd * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Random invertible matrix with condition number at most `cond`.
pub fn invertible(rng: &mut Rng, r: usize, cond: f64) -> DMatrix<f64> {
    use rand::Rng as _;
    let q1 = orthogonal(rng, r);
    let q2 = orthogonal(rng, r);
    // singular values in [1, cond]
    let d = DMatrix::from_fn(r, 1, |_, _| cond.powf(rng.random_range(0.0..=1.0)));
    let q1d = DMatrix::from_fn(r, r, |i, j| q1[(i, j)] * d[j]);
    q1d * q2.transpose()
}
