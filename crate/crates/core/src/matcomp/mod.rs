//! Low-rank matrix completion: `φ(W) = (1/|Ω|) ‖P_Ω(W) − P_Ω(W★)‖²_F`.
//!
//! [`CompletionProblem`] implements [`Objective`] for every geometry that
//! knows how to sample its factor product on Ω ([`CompletionModel`]).

mod init;
mod model;
mod step;

pub use init::{init_spectral, spectral_svd};
pub use model::CompletionModel;
pub use step::{linearized_step, tr_radius_seed, MIN_STEP};

use crate::error::{Error, Result};
use crate::linalg::pairwise_sum;
use crate::manifold::Objective;
use crate::sparse::SampledMatrix;

/// Observed training entries, an optional disjoint test set, and the target rank.
#[derive(Debug, Clone)]
pub struct CompletionProblem {
    train: SampledMatrix,
    test: Option<SampledMatrix>,
    rank: usize,
}

impl CompletionProblem {
    pub fn new(train: SampledMatrix, test: Option<SampledMatrix>, rank: usize) -> Result<Self> {
        let (d1, d2) = train.shape();
        if train.nnz() == 0 {
            return Err(Error::InvalidSample("no observed entries".into()));
        }
        if rank == 0 || rank > d1.min(d2) {
            return Err(Error::Config(format!("rank {rank} invalid for {d1}×{d2}")));
        }
        if let Some(t) = &test {
            if t.shape() != (d1, d2) {
                return Err(Error::Shape(format!("test set is {:?}, train is {:?}", t.shape(), (d1, d2))));
            }
            if let Some((i, j, _)) = t.iter().find(|&(i, j, _)| train.pattern().contains(i, j)) {
                return Err(Error::InvalidSample(format!("test index ({i}, {j}) is also a training index")));
            }
        }
        Ok(CompletionProblem { train, test, rank })
    }

    pub fn train(&self) -> &SampledMatrix {
        &self.train
    }

    pub fn test(&self) -> Option<&SampledMatrix> {
        self.test.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> (usize, usize) {
        self.train.shape()
    }

    fn inv_count(&self) -> f64 {
        1.0 / self.train.nnz() as f64
    }

    /// `S = (2/|Ω|)(P_Ω(W) − P_Ω(W★))`
    pub fn residual<G: CompletionModel>(&self, _geom: &G, x: &G::Point) -> SampledMatrix {
        let pred = G::sample(x, self.train.pattern());
        let scale = 2.0 * self.inv_count();
        let vals = pred.iter().zip(self.train.values()).map(|(p, w)| scale * (p - w)).collect();
        SampledMatrix::with_values(self.train.pattern().clone(), vals)
    }

    /// `S★ = (2/|Ω|) P_Ω(D W[ξ])`, the directional derivative of `S` along `ξ`.
    pub fn residual_derivative<G: CompletionModel>(&self, _geom: &G, x: &G::Point, xi: &G::Vector) -> SampledMatrix {
        let scale = 2.0 * self.inv_count();
        let vals = G::sample_tangent(x, xi, self.train.pattern()).into_iter().map(|v| scale * v).collect();
        SampledMatrix::with_values(self.train.pattern().clone(), vals)
    }

    /// Root mean squared error on the held-out entries.
    pub fn test_rmse<G: CompletionModel>(&self, _geom: &G, x: &G::Point) -> Option<f64> {
        let test = self.test.as_ref()?;
        if test.nnz() == 0 {
            return None;
        }
        let pred = G::sample(x, test.pattern());
        let sq: Vec<f64> = pred.iter().zip(test.values()).map(|(p, w)| (p - w) * (p - w)).collect();
        Some((pairwise_sum(&sq) / test.nnz() as f64).sqrt())
    }

    fn cost_from_prediction(&self, pred: &[f64]) -> f64 {
        let sq: Vec<f64> = pred.iter().zip(self.train.values()).map(|(p, w)| (p - w) * (p - w)).collect();
        pairwise_sum(&sq) * self.inv_count()
    }
}

impl<G: CompletionModel> Objective<G> for CompletionProblem {
    /// The scaled residual `S`.
    type State = SampledMatrix;

    fn cost(&self, x: &G::Point) -> f64 {
        let pred = G::sample(x, self.train.pattern());
        self.cost_from_prediction(&pred)
    }

    fn prepare(&self, x: &G::Point) -> (f64, SampledMatrix) {
        let pred = G::sample(x, self.train.pattern());
        let cost = self.cost_from_prediction(&pred);
        let scale = 2.0 * self.inv_count();
        let vals = pred.iter().zip(self.train.values()).map(|(p, w)| scale * (p - w)).collect();
        (cost, SampledMatrix::with_values(self.train.pattern().clone(), vals))
    }

    fn partials(&self, x: &G::Point, s: &SampledMatrix) -> G::Partials {
        G::partials(x, s)
    }

    fn directional_partials(&self, x: &G::Point, s: &SampledMatrix, xi: &G::Vector) -> G::Partials {
        let scale = 2.0 * self.inv_count();
        let vals = G::sample_tangent(x, xi, self.train.pattern()).into_iter().map(|v| scale * v).collect();
        let sstar = SampledMatrix::with_values(self.train.pattern().clone(), vals);
        G::directional_partials(x, xi, s, &sstar)
    }
}
