use super::{SynthesisError, SynthesisFit};
use crate::density::{GaussianMixture, StudentT};
use crate::dlm::evolve;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// How a `k`-step forecast is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMode {
    /// Synthesis of 1-step agents, simulated forward `k` steps.
    Direct,
    /// Synthesis model trained on lag-`k` agents, evolved once.
    Customized,
}

impl ForecastMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ForecastMode::Direct => "direct",
            ForecastMode::Customized => "customized",
        }
    }
}

/// Simulated predictive: one draw per saved iteration (times the replication
/// factor) plus the conditional normal each draw came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSample {
    pub samples: Vec<f64>,
    pub mixture: GaussianMixture,
}

impl PredictiveSample {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Point forecast: mean of the conditional means.
    pub fn mean(&self) -> f64 {
        self.mixture.mean()
    }

    /// Log score of the mixture at `y`.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        self.mixture.ln_pdf(y)
    }
}

/// 1-step forecast from the synthesis posterior at `T`, given the agents'
/// densities `next` for `T + 1` (caller agent order).
pub fn predict_one_step<R: Rng + ?Sized>(
    fit: &SynthesisFit,
    next: &[StudentT],
    replication: usize,
    rng: &mut R,
) -> Result<PredictiveSample, SynthesisError> {
    simulate(fit, next, 1, replication, rng)
}

/// `k`-step forecast. `gap` extra evolution steps are added when the fit is
/// older than the forecast origin (origin thinning).
pub fn predict_k_step<R: Rng + ?Sized>(
    fit: &SynthesisFit,
    next: &[StudentT],
    mode: ForecastMode,
    k: usize,
    gap: usize,
    replication: usize,
    rng: &mut R,
) -> Result<PredictiveSample, SynthesisError> {
    if k == 0 {
        return Err(SynthesisError::Config("horizon must be at least 1".into()));
    }
    let (expected, steps) = match mode {
        ForecastMode::Customized => (k, 1),
        ForecastMode::Direct => (1, k),
    };
    if fit.horizon() != expected {
        return Err(SynthesisError::HorizonMismatch { mode: mode.as_str(), k, expected, found: fit.horizon() });
    }
    simulate(fit, next, steps + gap, replication, rng)
}

fn simulate<R: Rng + ?Sized>(
    fit: &SynthesisFit,
    next: &[StudentT],
    steps: usize,
    replication: usize,
    rng: &mut R,
) -> Result<PredictiveSample, SynthesisError> {
    let j = fit.n_agents();
    if next.len() != j {
        return Err(SynthesisError::Shape(format!("{} next-period densities for {j} agents", next.len())));
    }
    if replication == 0 {
        return Err(SynthesisError::Config("replication must be at least 1".into()));
    }
    let next: Vec<StudentT> = fit.order().iter().map(|&c| next[c]).collect();
    let disc = fit.discount();
    let total = fit.terminal().len() * replication;
    let mut samples = Vec::with_capacity(total);
    let mut means = Vec::with_capacity(total);
    let mut variances = Vec::with_capacity(total);
    for draw in fit.terminal() {
        for _ in 0..replication {
            let mut state = draw.posterior.clone();
            let mut theta = draw.theta.clone();
            let mut v = draw.v;
            for _ in 0..steps {
                let (th, vv) = evolve(&theta, v, &state, disc, rng);
                theta = th;
                v = vv;
                // (C, n) for the next step: R = C / delta, dof beta * n
                state.scale /= disc.delta();
                state.dof *= disc.beta();
            }
            let mut mean = theta[0];
            for (c, h) in next.iter().enumerate() {
                mean += theta[c + 1] * h.sample(rng);
            }
            let z: f64 = StandardNormal.sample(rng);
            samples.push(mean + v.sqrt() * z);
            means.push(mean);
            variances.push(v);
        }
    }
    let mixture = GaussianMixture::new(means, variances)
        .ok_or_else(|| SynthesisError::Shape("degenerate predictive mixture".into()))?;
    Ok(PredictiveSample { samples, mixture })
}
