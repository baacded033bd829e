use super::ffbs::Ffbs;
use super::latent::{draw_latent_flat, init_latent_states};
use super::{AgentDensities, SynthesisError};
use crate::data::YearMonth;
use crate::dlm::{DiscountConfig, DlmPosterior};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Prior mean of the synthesis coefficients `theta_0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMean {
    /// `(0, 1/J, ..., 1/J)`.
    EqualWeights,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub n_saved: usize,
    pub discount: DiscountConfig,
    pub n0: f64,
    pub s0: f64,
    pub prior_mean: PriorMean,
    /// Keep every saved `(x, theta, v, phi)` path (needed for dependency
    /// diagnostics and draw dumps; memory grows as `n_saved * T * J`).
    pub retain_paths: bool,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            burn_in: 2000,
            n_saved: 3000,
            discount: DiscountConfig::new(0.99, 0.95).expect("valid defaults"),
            n0: 10.0,
            s0: 0.01,
            prior_mean: PriorMean::EqualWeights,
            retain_paths: false,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.n_saved == 0 {
            return Err(SynthesisError::Config("n_saved must be at least 1".into()));
        }
        if !(self.n0 > 0.0) || !(self.s0 > 0.0) {
            return Err(SynthesisError::Config(format!("n0 = {} and s0 = {} must be positive", self.n0, self.s0)));
        }
        Ok(())
    }

    /// Prior for `theta_0` with `J` agents: `C_0 = I`.
    pub fn prior(&self, j: usize) -> DlmPosterior {
        let mean = match self.prior_mean {
            PriorMean::EqualWeights => DVector::from_fn(j + 1, |i, _| if i == 0 { 0.0 } else { 1.0 / j as f64 }),
            PriorMean::Zero => DVector::zeros(j + 1),
        };
        DlmPosterior::default_prior(j + 1, self.n0, self.s0)
            .and_then(|p| p.with_mean(mean))
            .expect("validated prior")
    }
}

/// Saved state at the final time `T` of one Gibbs iteration, with the filtered
/// posterior that parameterizes its evolution. Agent columns are in the
/// fit's internal (name-sorted) order.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalDraw {
    pub theta: DVector<f64>,
    pub v: f64,
    pub x: DVector<f64>,
    pub posterior: DlmPosterior,
}

/// One full saved path, agent columns in caller order.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisDraw {
    /// `T x (J + 1)`, intercept first.
    pub theta: DMatrix<f64>,
    pub v: Vec<f64>,
    pub x: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

/// Output of [`run_gibbs`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisFit {
    names: Vec<String>,
    /// Internal column `c` is caller column `order[c]`.
    order: Vec<usize>,
    horizon: usize,
    dates: Vec<YearMonth>,
    discount: DiscountConfig,
    terminal: Vec<TerminalDraw>,
    theta_mean: DMatrix<f64>,
    theta_sd: DMatrix<f64>,
    paths: Option<Vec<SynthesisDraw>>,
}

impl SynthesisFit {
    /// Fit assembled from explicit terminal draws (agent columns in the given order).
    pub fn from_terminal(
        names: Vec<String>,
        horizon: usize,
        discount: DiscountConfig,
        terminal: Vec<TerminalDraw>,
    ) -> Result<Self, SynthesisError> {
        let j = names.len();
        if terminal.is_empty() || terminal.iter().any(|d| d.theta.len() != j + 1 || d.x.len() != j) {
            return Err(SynthesisError::Shape("terminal draws do not match the agent count".into()));
        }
        Ok(Self {
            order: (0..j).collect(),
            names,
            horizon,
            dates: Vec::new(),
            discount,
            terminal,
            theta_mean: DMatrix::zeros(0, j + 1),
            theta_sd: DMatrix::zeros(0, j + 1),
            paths: None,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_agents(&self) -> usize {
        self.names.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn discount(&self) -> &DiscountConfig {
        &self.discount
    }

    pub fn terminal(&self) -> &[TerminalDraw] {
        &self.terminal
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// Posterior mean of `theta_t` over saved draws, `T x (J + 1)`, caller order.
    pub fn theta_mean(&self) -> &DMatrix<f64> {
        &self.theta_mean
    }

    pub fn theta_sd(&self) -> &DMatrix<f64> {
        &self.theta_sd
    }

    pub fn paths(&self) -> Option<&[SynthesisDraw]> {
        self.paths.as_deref()
    }

    /// Posterior mean of the terminal coefficients in caller order.
    pub fn terminal_theta_mean(&self) -> DVector<f64> {
        let p = self.n_agents() + 1;
        let mut out = DVector::zeros(p);
        for d in &self.terminal {
            out[0] += d.theta[0];
            for (c, &caller) in self.order.iter().enumerate() {
                out[caller + 1] += d.theta[c + 1];
            }
        }
        out / self.terminal.len() as f64
    }

    /// Delimited dump, one row per `(iteration, t)`: theta columns then `v`.
    pub fn write_draws<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let Some(paths) = &self.paths else {
            return Err(std::io::Error::other("draw paths were not retained"));
        };
        write!(w, "iteration,date,theta_intercept")?;
        for n in &self.names {
            write!(w, ",theta_{n}")?;
        }
        writeln!(w, ",v")?;
        for (i, d) in paths.iter().enumerate() {
            for t in 0..d.v.len() {
                write!(w, "{i},{}", self.dates[t])?;
                for c in 0..d.theta.ncols() {
                    write!(w, ",{}", d.theta[(t, c)])?;
                }
                writeln!(w, ",{}", d.v[t])?;
            }
        }
        Ok(())
    }
}

/// Run the two-block Gibbs sampler on `y_{1:T}` and agent densities `H_{1:T}`.
///
/// Latent states are initialized from the agent densities; each iteration then
/// draws `(theta, v)` by FFBS and refreshes the latent states. Agents are
/// processed in name-sorted order so results do not depend on input column
/// order.
pub fn run_gibbs<R: Rng + ?Sized>(
    agents: &AgentDensities,
    y: &[f64],
    cfg: &GibbsConfig,
    rng: &mut R,
) -> Result<SynthesisFit, SynthesisError> {
    cfg.validate()?;
    let t_len = agents.len();
    if t_len < 2 {
        return Err(SynthesisError::TooShort(t_len));
    }
    if y.len() != t_len {
        return Err(SynthesisError::Shape(format!("{} targets for {} density rows", y.len(), t_len)));
    }
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(SynthesisError::Shape(format!("non-finite target {bad}")));
    }
    let order = agents.canonical_order();
    let ag = agents.reordered(&order);
    let j = ag.n_agents();
    let p = j + 1;
    let prior = cfg.prior(j);
    let mut states = init_latent_states(&ag, rng);
    let mut ws = Ffbs::new(&prior, cfg.discount, t_len);
    let mut sum = vec![0.0; t_len * p];
    let mut sum_sq = vec![0.0; t_len * p];
    let mut terminal = Vec::with_capacity(cfg.n_saved);
    let mut paths = cfg.retain_paths.then(|| Vec::with_capacity(cfg.n_saved));
    // caller column of each internal theta column
    let col_map: Vec<usize> = std::iter::once(0).chain(order.iter().map(|&c| c + 1)).collect();

    for it in 0..cfg.burn_in + cfg.n_saved {
        let wrap = |e| SynthesisError::Iteration { iteration: it, source: Box::new(e) };
        ws.forward(&states, y).map_err(wrap)?;
        ws.backward(rng);
        if it >= cfg.burn_in {
            for (acc, (sq, th)) in sum.iter_mut().zip(sum_sq.iter_mut().zip(&ws.theta)) {
                *acc += th;
                *sq += th * th;
            }
            terminal.push(TerminalDraw {
                theta: DVector::from_column_slice(ws.theta_row(t_len - 1)),
                v: ws.v[t_len - 1],
                x: DVector::from_column_slice(states.row(t_len - 1)),
                posterior: ws.filtered(t_len),
            });
            if let Some(paths) = paths.as_mut() {
                let mut theta = DMatrix::zeros(t_len, p);
                let mut x = DMatrix::zeros(t_len, j);
                let mut phi = DMatrix::zeros(t_len, j);
                for t in 0..t_len {
                    let row = ws.theta_row(t);
                    for c in 0..p {
                        theta[(t, col_map[c])] = row[c];
                    }
                    for c in 0..j {
                        x[(t, order[c])] = states.x(t, c);
                        phi[(t, order[c])] = states.phi(t, c);
                    }
                }
                paths.push(SynthesisDraw { theta, v: ws.v.clone(), x, phi });
            }
        }
        draw_latent_flat(&mut states, &ws.theta, &ws.v, y, &ag, rng).map_err(wrap)?;
    }

    let n = cfg.n_saved as f64;
    let mut theta_mean = DMatrix::zeros(t_len, p);
    let mut theta_sd = DMatrix::zeros(t_len, p);
    for t in 0..t_len {
        for c in 0..p {
            let mean = sum[t * p + c] / n;
            let var = (sum_sq[t * p + c] / n - mean * mean).max(0.0);
            theta_mean[(t, col_map[c])] = mean;
            theta_sd[(t, col_map[c])] = var.sqrt();
        }
    }
    Ok(SynthesisFit {
        names: agents.names().to_vec(),
        order,
        horizon: agents.horizon(),
        dates: agents.dates().to_vec(),
        discount: cfg.discount,
        terminal,
        theta_mean,
        theta_sd,
        paths,
    })
}
