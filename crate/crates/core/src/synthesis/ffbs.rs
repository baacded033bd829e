//! Forward filtering, backward sampling for the synthesis regression
//! `y_t = F_t' theta_t + nu_t`, `F_t = (1, x_t')'`.
//!
//! The forward pass is the same conjugate update as [`crate::dlm::filter_step`],
//! written on flat buffers because it runs once per Gibbs iteration.

use super::{LatentStates, SynthesisError};
use crate::dlm::{DiscountConfig, DlmError, DlmPosterior};
use crate::linalg::psd_factor;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// One joint draw of `(theta_{1:T}, v_{1:T})` plus the terminal filtered posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct FfbsDraw {
    /// `T x (J + 1)`, intercept first.
    pub theta: DMatrix<f64>,
    pub v: Vec<f64>,
    pub terminal: DlmPosterior,
}

/// Draw `(theta_{1:T}, v_{1:T}) | x_{1:T}, y_{1:T}`.
pub fn ffbs_draw<R: Rng + ?Sized>(
    x: &LatentStates,
    y: &[f64],
    prior: &DlmPosterior,
    disc: &DiscountConfig,
    rng: &mut R,
) -> Result<FfbsDraw, SynthesisError> {
    if x.len() != y.len() || prior.dim() != x.n_agents() + 1 {
        return Err(SynthesisError::Shape(format!(
            "{} latent rows of width {} against {} targets and a prior of dimension {}",
            x.len(),
            x.n_agents(),
            y.len(),
            prior.dim()
        )));
    }
    let mut ws = Ffbs::new(prior, *disc, y.len());
    ws.forward(x, y)?;
    ws.backward(rng);
    let p = prior.dim();
    Ok(FfbsDraw {
        theta: DMatrix::from_row_slice(y.len(), p, &ws.theta),
        v: ws.v.clone(),
        terminal: ws.filtered(y.len()),
    })
}

/// Reusable FFBS buffers. Filtered moments are stored for `T + 1` times,
/// index 0 being the prior.
#[derive(Debug, Clone)]
pub(crate) struct Ffbs {
    p: usize,
    t_len: usize,
    disc: DiscountConfig,
    m: Vec<f64>,
    c: Vec<f64>,
    n: Vec<f64>,
    s: Vec<f64>,
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    f: Vec<f64>,
    rf: Vec<f64>,
    chol: Vec<f64>,
    z: Vec<f64>,
}

impl Ffbs {
    pub fn new(prior: &DlmPosterior, disc: DiscountConfig, t_len: usize) -> Self {
        let p = prior.dim();
        let mut ws = Self {
            p,
            t_len,
            disc,
            m: vec![0.0; (t_len + 1) * p],
            c: vec![0.0; (t_len + 1) * p * p],
            n: vec![0.0; t_len + 1],
            s: vec![0.0; t_len + 1],
            theta: vec![0.0; t_len * p],
            v: vec![0.0; t_len],
            f: vec![0.0; p],
            rf: vec![0.0; p],
            chol: vec![0.0; p * p],
            z: vec![0.0; p],
        };
        ws.m[..p].copy_from_slice(prior.mean.as_slice());
        for i in 0..p {
            for j in 0..p {
                ws.c[i * p + j] = prior.scale[(i, j)];
            }
        }
        ws.n[0] = prior.dof;
        ws.s[0] = prior.vol;
        ws
    }

    pub fn forward(&mut self, x: &LatentStates, y: &[f64]) -> Result<(), SynthesisError> {
        let p = self.p;
        let pp = p * p;
        let inv_delta = 1.0 / self.disc.delta();
        let beta = self.disc.beta();
        for t in 0..self.t_len {
            self.f[0] = 1.0;
            self.f[1..].copy_from_slice(x.row(t));
            let (m_prev, m_cur) = self.m.split_at_mut((t + 1) * p);
            let m_prev = &m_prev[t * p..];
            let m_cur = &mut m_cur[..p];
            let (c_prev, c_cur) = self.c.split_at_mut((t + 1) * pp);
            let c_prev = &c_prev[t * pp..];
            let c_cur = &mut c_cur[..pp];
            let f = &self.f;
            for i in 0..p {
                self.rf[i] = dot(&c_prev[i * p..(i + 1) * p], f) * inv_delta;
            }
            let q = dot(f, &self.rf) + self.s[t];
            if !(q > 0.0) || !q.is_finite() {
                return Err(SynthesisError::Filter { t, source: DlmError::NonPositiveVariance(q) });
            }
            let e = y[t] - dot(f, m_prev);
            let prior_dof = beta * self.n[t];
            let dof = prior_dof + 1.0;
            let r = (prior_dof + e * e / q) / dof;
            for i in 0..p {
                m_cur[i] = m_prev[i] + self.rf[i] / q * e;
                for j in i..p {
                    let val = r * (c_prev[i * p + j] * inv_delta - self.rf[i] * self.rf[j] / q);
                    c_cur[i * p + j] = val;
                    c_cur[j * p + i] = val;
                }
            }
            self.n[t + 1] = dof;
            self.s[t + 1] = r * self.s[t];
        }
        Ok(())
    }

    pub fn backward<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let p = self.p;
        let big_t = self.t_len;
        let (n_t, s_t) = (self.n[big_t], self.s[big_t]);
        let mut precision = gamma_rate(0.5 * n_t, 0.5 * n_t * s_t, rng);
        let v = 1.0 / precision;
        self.v[big_t - 1] = v;
        self.factor(big_t);
        let sd = (v / s_t).sqrt();
        self.draw_normal(rng);
        for i in 0..p {
            let lz = dot(&self.chol[i * p..(i + 1) * p], &self.z);
            self.theta[(big_t - 1) * p + i] = self.m[big_t * p + i] + sd * lz;
        }
        let delta = self.disc.delta();
        let beta = self.disc.beta();
        for t in (0..big_t - 1).rev() {
            let k = t + 1;
            let (n_k, s_k) = (self.n[k], self.s[k]);
            if beta < 1.0 {
                let gamma = gamma_rate(0.5 * (1.0 - beta) * n_k, 0.5 * n_k * s_k, rng);
                precision = beta * precision + gamma;
            }
            let v = 1.0 / precision;
            self.v[t] = v;
            let (head, tail) = self.theta.split_at_mut((t + 1) * p);
            let cur = &mut head[t * p..];
            let next = &tail[..p];
            if delta < 1.0 {
                let m = &self.m[k * p..(k + 1) * p];
                // factor C_k into self.chol
                factor_into(&self.c[k * p * p..(k + 1) * p * p], p, &mut self.chol);
                for zi in self.z.iter_mut() {
                    *zi = StandardNormal.sample(rng);
                }
                let sd = ((1.0 - delta) * v / s_k).sqrt();
                for i in 0..p {
                    let lz = dot(&self.chol[i * p..(i + 1) * p], &self.z);
                    cur[i] = m[i] + delta * (next[i] - m[i]) + sd * lz;
                }
            } else {
                cur.copy_from_slice(next);
            }
        }
    }

    /// Filtered posterior after `t` observations (`t = 0` is the prior).
    pub fn filtered(&self, t: usize) -> DlmPosterior {
        let p = self.p;
        DlmPosterior {
            mean: DVector::from_column_slice(&self.m[t * p..(t + 1) * p]),
            scale: DMatrix::from_row_slice(p, p, &self.c[t * p * p..(t + 1) * p * p]),
            dof: self.n[t],
            vol: self.s[t],
            time: t,
        }
    }

    pub fn theta_row(&self, t: usize) -> &[f64] {
        &self.theta[t * self.p..(t + 1) * self.p]
    }

    fn factor(&mut self, k: usize) {
        let p = self.p;
        factor_into(&self.c[k * p * p..(k + 1) * p * p], p, &mut self.chol);
    }

    fn draw_normal<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for zi in self.z.iter_mut() {
            *zi = StandardNormal.sample(rng);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gamma draw with shape/rate parameterization.
fn gamma_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters").sample(rng)
}

/// Row-major lower factor `L L' = C` of a small symmetric matrix.
fn factor_into(c: &[f64], p: usize, l: &mut [f64]) {
    l.iter_mut().for_each(|x| *x = 0.0);
    for j in 0..p {
        let mut d = c[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if !(d > 0.0) {
            // semi-definite scale: fall back to the clipped eigen square root
            let factor = psd_factor(&DMatrix::from_row_slice(p, p, c));
            for i in 0..p {
                for k in 0..p {
                    l[i * p + k] = factor[(i, k)];
                }
            }
            return;
        }
        let d = d.sqrt();
        l[j * p + j] = d;
        for i in (j + 1)..p {
            let mut acc = c[i * p + j];
            for k in 0..j {
                acc -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = acc / d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dlm::filter_step;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn latent(rows: &[&[f64]]) -> LatentStates {
        LatentStates::from_rows(rows.iter().map(|r| r.to_vec()).collect())
    }

    #[test]
    fn forward_pass_matches_reference_filter() {
        let x = latent(&[&[0.1, -0.3], &[0.5, 0.2], &[-0.7, 1.1], &[0.0, 0.4]]);
        let y = [0.2, -0.1, 0.6, 0.3];
        let prior = DlmPosterior::default_prior(3, 10.0, 0.01).unwrap();
        let disc = DiscountConfig::new(0.97, 0.93).unwrap();
        let mut ws = Ffbs::new(&prior, disc, y.len());
        ws.forward(&x, &y).unwrap();
        let mut post = prior.clone();
        for t in 0..y.len() {
            let f = DVector::from_vec(vec![1.0, x.row(t)[0], x.row(t)[1]]);
            post = filter_step(&post, &f, y[t], &disc).unwrap().posterior;
            let mine = ws.filtered(t + 1);
            assert!((mine.mean - &post.mean).amax() < 1e-12);
            assert!((mine.scale - &post.scale).amax() < 1e-12);
            assert!((mine.vol - post.vol).abs() < 1e-14);
            assert_eq!(mine.dof, post.dof);
        }
    }

    #[test]
    fn static_model_gives_constant_paths() {
        let x = latent(&[&[0.1], &[0.5], &[-0.7]]);
        let y = [0.2, -0.1, 0.6];
        let prior = DlmPosterior::default_prior(2, 10.0, 0.01).unwrap();
        let draw = ffbs_draw(&x, &y, &prior, &DiscountConfig::static_model(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(draw.v.iter().all(|v| *v == draw.v[0]));
        assert_eq!(draw.theta.row(0), draw.theta.row(2));
    }

    #[test]
    fn small_factor_matches_nalgebra() {
        let c = [4.0, 2.0, 0.4, 2.0, 3.0, 0.1, 0.4, 0.1, 1.0];
        let mut l = [0.0; 9];
        factor_into(&c, 3, &mut l);
        let reference = DMatrix::from_row_slice(3, 3, &c).cholesky().unwrap().l();
        for i in 0..3 {
            for j in 0..3 {
                assert!((l[i * 3 + j] - reference[(i, j)]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn semidefinite_factor_falls_back() {
        let c = [1.0, 1.0, 1.0, 1.0];
        let mut l = [0.0; 4];
        factor_into(&c, 2, &mut l);
        let rebuilt = DMatrix::from_row_slice(2, 2, &l) * DMatrix::from_row_slice(2, 2, &l).transpose();
        assert!((rebuilt - DMatrix::from_row_slice(2, 2, &c)).amax() < 1e-12);
    }
}
