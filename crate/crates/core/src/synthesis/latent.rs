//! Latent agent states `x_t` and their Student-t scale-mixture weights `phi_t`.
//!
//! Each agent density `T_n(h, H)` is written as `x | phi ~ N(h, H / phi)` with
//! `phi ~ G(n/2, n/2)`. Given `phi`, the synthesis parameters and `y_t`, the
//! states are jointly normal and are drawn by perturbing a prior draw
//! (`x = h + z + b (c - theta'z - eps)`), which costs `O(J)` per time point and
//! needs no matrix factorization.

use super::{AgentDensities, SynthesisError};
use crate::density::StudentT;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// Degrees of freedom above which an agent is treated as normal (`phi = 1`).
const NORMAL_DOF: f64 = 1e8;

/// `T x J` latent states with their mixing scales.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentStates {
    t_len: usize,
    j: usize,
    x: Vec<f64>,
    phi: Vec<f64>,
}

impl LatentStates {
    /// States from explicit rows with unit mixing scales.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let t_len = rows.len();
        let j = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == j), "ragged latent rows");
        let x: Vec<f64> = rows.into_iter().flatten().collect();
        Self { t_len, j, phi: vec![1.0; x.len()], x }
    }

    pub fn len(&self) -> usize {
        self.t_len
    }

    pub fn is_empty(&self) -> bool {
        self.t_len == 0
    }

    pub fn n_agents(&self) -> usize {
        self.j
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.x[t * self.j..(t + 1) * self.j]
    }

    pub fn phi_row(&self, t: usize) -> &[f64] {
        &self.phi[t * self.j..(t + 1) * self.j]
    }

    pub fn x(&self, t: usize, j: usize) -> f64 {
        self.x[t * self.j + j]
    }

    pub fn phi(&self, t: usize, j: usize) -> f64 {
        self.phi[t * self.j + j]
    }

    pub fn x_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.t_len, self.j, &self.x)
    }

    pub fn phi_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.t_len, self.j, &self.phi)
    }
}

/// Draw `x_tj ~ h_tj` independently, then `phi_tj` from its conditional given `x_tj`.
pub fn init_latent_states<R: Rng + ?Sized>(agents: &AgentDensities, rng: &mut R) -> LatentStates {
    let (t_len, j) = (agents.len(), agents.n_agents());
    let mut x = Vec::with_capacity(t_len * j);
    let mut phi = Vec::with_capacity(t_len * j);
    for t in 0..t_len {
        for h in agents.row(t) {
            let xt = h.sample(rng);
            x.push(xt);
            phi.push(draw_phi(h, xt, rng));
        }
    }
    LatentStates { t_len, j, x, phi }
}

/// Conditional mean and covariance of `x_t` given `(theta_t, v_t, y_t, phi_t)`:
/// `N(h + b c, H - b b' g)` with `H = diag(H_j / phi_j)`, `c = y - theta_0 - h'theta_{1:J}`,
/// `g = v + theta'H theta` and `b = H theta / g`.
pub fn latent_conditional(
    densities: &[StudentT],
    phi: &[f64],
    theta: &[f64],
    v: f64,
    y: f64,
) -> Result<(DVector<f64>, DMatrix<f64>), SynthesisError> {
    let j = densities.len();
    let h = DVector::from_fn(j, |i, _| densities[i].location());
    let big_h = DVector::from_fn(j, |i, _| densities[i].scale() / phi[i]);
    let w = DVector::from_column_slice(&theta[1..]);
    let c = y - theta[0] - h.dot(&w);
    let hw = big_h.component_mul(&w);
    let g = v + w.dot(&hw);
    if !(g > 0.0) || !g.is_finite() {
        return Err(SynthesisError::NonPositiveG { t: 0, g });
    }
    let b = hw / g;
    let mean = &h + &b * c;
    let cov = DMatrix::from_diagonal(&big_h) - (&b * b.transpose()) * g;
    Ok((mean, cov))
}

/// One draw of all latent states and mixing scales given the synthesis parameters.
/// `theta` is `T x (J + 1)` with the intercept first.
pub fn draw_latent_states<R: Rng + ?Sized>(
    states: &mut LatentStates,
    theta: &DMatrix<f64>,
    v: &[f64],
    y: &[f64],
    agents: &AgentDensities,
    rng: &mut R,
) -> Result<(), SynthesisError> {
    let p = agents.n_agents() + 1;
    if theta.nrows() != agents.len() || theta.ncols() != p || v.len() != agents.len() || y.len() != agents.len() {
        return Err(SynthesisError::Shape("latent-state inputs disagree in shape".into()));
    }
    let flat: Vec<f64> = (0..theta.nrows()).flat_map(|t| theta.row(t).iter().copied().collect::<Vec<_>>()).collect();
    draw_latent_flat(states, &flat, v, y, agents, rng)
}

pub(crate) fn draw_latent_flat<R: Rng + ?Sized>(
    states: &mut LatentStates,
    theta: &[f64],
    v: &[f64],
    y: &[f64],
    agents: &AgentDensities,
    rng: &mut R,
) -> Result<(), SynthesisError> {
    let j = agents.n_agents();
    let p = j + 1;
    let mut z = vec![0.0; j];
    let mut big_h = vec![0.0; j];
    for t in 0..agents.len() {
        let dens = agents.row(t);
        let th = &theta[t * p..(t + 1) * p];
        let phi = &states.phi[t * j..(t + 1) * j];
        let mut c = y[t] - th[0];
        let mut g = v[t];
        let mut proj = 0.0;
        for i in 0..j {
            let hi = dens[i].scale() / phi[i];
            big_h[i] = hi;
            c -= dens[i].location() * th[i + 1];
            g += th[i + 1] * th[i + 1] * hi;
            z[i] = if hi > 0.0 {
                let e: f64 = StandardNormal.sample(rng);
                hi.sqrt() * e
            } else {
                0.0
            };
            proj += th[i + 1] * z[i];
        }
        if !(g > 0.0) || !g.is_finite() {
            return Err(SynthesisError::NonPositiveG { t, g });
        }
        let eps: f64 = StandardNormal.sample(rng);
        let resid = (c - proj - v[t].sqrt() * eps) / g;
        let x = &mut states.x[t * j..(t + 1) * j];
        for i in 0..j {
            x[i] = dens[i].location() + z[i] + big_h[i] * th[i + 1] * resid;
        }
        for i in 0..j {
            let xi = states.x[t * j + i];
            states.phi[t * j + i] = draw_phi(&dens[i], xi, rng);
        }
    }
    Ok(())
}

/// `phi | x ~ G((n + 1)/2, (n + d)/2)`, `d = (x - h)^2 / H`; fixed at 1 for
/// point masses and normal agents.
fn draw_phi<R: Rng + ?Sized>(h: &StudentT, x: f64, rng: &mut R) -> f64 {
    if h.is_point_mass() || h.dof() > NORMAL_DOF {
        return 1.0;
    }
    let n = h.dof();
    let d = (x - h.location()).powi(2) / h.scale();
    Gamma::new(0.5 * (n + 1.0), 2.0 / (n + d))
        .expect("positive gamma parameters")
        .sample(rng)
}
