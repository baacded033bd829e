//! Decouple-recouple forecasting engine.
//!
//! A large predictive regression is split into small per-group dynamic linear
//! models ([`dlm`]), whose Student-t forecast densities are then recoupled by a
//! Bayesian predictive synthesis Gibbs sampler ([`synthesis`]). Competing
//! combination and shrinkage methods live in [`baselines`]; density scores and
//! latent-dependency diagnostics in [`evaluation`]; power-utility portfolio
//! backtests in [`portfolio`]. [`experiment`] wires everything into the
//! expanding-window protocol used by the `drs` binary.

pub mod baselines;
pub mod data;
pub mod density;
pub mod dlm;
pub mod evaluation;
pub mod experiment;
pub mod linalg;
pub mod portfolio;
pub mod rng;
pub mod synthesis;

pub use data::{GroupPartition, SupervisedSlice, TimeSeriesPanel, YearMonth};
pub use density::{GaussianMixture, StudentT};
pub use dlm::{DiscountConfig, DlmPosterior};
