use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("singular Lyapunov coefficient: smallest eigenvalue {smallest:e}, norm {norm:e}")]
    SingularCoefficient { smallest: f64, norm: f64 },

    #[error("rank drop: smallest singular value {smallest:e} against largest {largest:e}")]
    RankDrop { smallest: f64, largest: f64 },

    #[error("matrix is not symmetric (relative defect {defect:e})")]
    NotSymmetric { defect: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {smallest:e})")]
    NotPositiveDefinite { smallest: f64 },

    #[error("factor columns are not orthonormal (defect {defect:e})")]
    NotOrthonormal { defect: f64 },

    #[error("polynomial is unbounded below")]
    UnboundedPolynomial,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("search direction is not a descent direction (slope {slope:e})")]
    NotDescent { slope: f64 },

    #[error("line search failed after {backtracks} backtracks")]
    LineSearch { backtracks: usize },

    #[error("search direction is zero")]
    ZeroDirection,

    #[error("gradient is zero")]
    ZeroGradient,

    #[error("observed data is rank deficient: sigma_r = {sigma_r:e}")]
    RankDeficientData { sigma_r: f64 },

    #[error("invalid sampled matrix: {0}")]
    InvalidSample(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Invalid(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
