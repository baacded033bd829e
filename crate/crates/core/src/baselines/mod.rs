//! Comparison methods: historical average, equal-weight pool, BMA, LASSO and
//! principal-component regression. The full-model benchmark is a plain
//! [`crate::dlm`] run on the merged predictor set.

mod average;
mod bma;
mod lasso;
mod pca;
mod pool;

pub use average::historical_average;
pub use bma::{bma_step, BmaState};
pub use lasso::{
    lambda_grid, lambda_max, lasso_fit, lasso_loo_select, lasso_predictive_density, kkt_residual, LassoFit,
    LassoSelection,
};
pub use pca::{pca_decompose, pc_regression_density, FactorModel};
pub use pool::{equal_weight_pool, LinearPool};

/// Floor applied to every residual variance so log scores stay finite.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("every model assigns zero density to the realized value")]
    ZeroMass,
    #[error("lambda must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("lambda grid is empty")]
    EmptyGrid,
    #[error("column {0} has zero variance")]
    ZeroVariance(usize),
    #[error("coordinate descent did not converge after {sweeps} sweeps (KKT residual {gap:e})")]
    NoConvergence { sweeps: usize, gap: f64 },
    #[error("rank {rank} is below the requested {requested} factors")]
    RankDeficient { rank: usize, requested: usize },
    #[error("{0}")]
    Shape(String),
    #[error(transparent)]
    Dlm(#[from] crate::dlm::DlmError),
}
