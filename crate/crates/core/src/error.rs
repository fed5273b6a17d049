use thiserror::Error;

use crate::expr::ExprError;
use crate::integrate::IntegrateError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error("{what}: expected {expected}, got {got}")]
    Dimension { what: &'static str, expected: usize, got: usize },
    #[error("frame is rank deficient at {point:?} (σ_min/σ_max = {ratio:e})")]
    RankDeficient { point: Vec<f64>, ratio: f64 },
    #[error("fibre metric is not symmetric positive definite at {point:?}")]
    NotPositiveDefinite { point: Vec<f64> },
    #[error("frame plus complement is singular at {point:?}")]
    CompletionFailure { point: Vec<f64> },
    #[error("{what} is not tangent to the distribution (residual {residual:e})")]
    NotInDistribution { what: &'static str, residual: f64 },
    #[error("covector does not annihilate the distribution (residual {residual:e})")]
    NotAnnihilator { residual: f64 },
    #[error("annihilator basis degenerates at t = {t}")]
    BasisDegeneracy { t: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
