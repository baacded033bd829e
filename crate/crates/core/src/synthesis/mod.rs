//! Bayesian predictive synthesis: recoupling agent forecast densities.
//!
//! The synthesis model treats each agent density `h_tj` as a prior over a
//! latent state `x_tj` and links the target through a dynamic regression
//! `y_t = theta_t0 + x_t' theta_t,1:J + nu_t` with discount dynamics. The joint
//! posterior is explored by a two-block Gibbs sampler: FFBS for
//! `(theta_{1:T}, v_{1:T})` given the latent states, then the latent states
//! given the synthesis parameters.

mod agents;
mod ffbs;
mod gibbs;
mod latent;
mod predict;

pub use agents::AgentDensities;
pub use ffbs::{ffbs_draw, FfbsDraw};
pub use gibbs::{run_gibbs, GibbsConfig, PriorMean, SynthesisDraw, SynthesisFit, TerminalDraw};
pub use latent::{draw_latent_states, init_latent_states, latent_conditional, LatentStates};
pub use predict::{predict_k_step, predict_one_step, ForecastMode, PredictiveSample};

use crate::dlm::DlmError;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SynthesisError {
    #[error("{0}")]
    Shape(String),
    #[error("synthesis needs at least 2 time points, got {0}")]
    TooShort(usize),
    #[error("non-positive latent-state variance g = {g} at row {t}")]
    NonPositiveG { t: usize, g: f64 },
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<SynthesisError>,
    },
    #[error("filter failed at row {t}: {source}")]
    Filter { t: usize, source: DlmError },
    #[error("{mode} forecasting at horizon {k} needs agents built for horizon {expected}, got {found}")]
    HorizonMismatch { mode: &'static str, k: usize, expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}
