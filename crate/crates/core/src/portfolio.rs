//! Single risky asset, power-utility allocation and certainty-equivalent returns.
//!
//! Returns are log excess returns `y`; with weight `w` on the risky asset the
//! one-period gross wealth is `(1 - w) e^{r_f} + w e^{r_f + y}` and utility is
//! `W^{1 - gamma} / (1 - gamma)`.

use crate::data::YearMonth;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum PortfolioError {
    #[error("invalid allocation settings: {0}")]
    Config(String),
    #[error("no draws supplied")]
    NoDraws,
    #[error("every weight in [{lower}, {upper}] gives non-positive wealth for some draw; tighten the bounds")]
    Infeasible { lower: f64, upper: f64 },
    #[error("{date}: non-positive realized wealth {wealth} at weight {weight}")]
    Wiped { date: YearMonth, weight: f64, wealth: f64 },
    #[error("utility sums {model} and {reference} are zero or differ in sign")]
    SignMismatch { model: f64, reference: f64 },
    #[error("{date}: single-period CER {cer} is at most -1")]
    CerBelowMinusOne { date: YearMonth, cer: f64 },
    #[error("series lengths differ: {0}")]
    Length(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    pub gamma: f64,
    pub lower: f64,
    pub upper: f64,
    pub step: f64,
}

impl AllocationConfig {
    pub fn new(gamma: f64, lower: f64, upper: f64, step: f64) -> Result<Self, PortfolioError> {
        let cfg = Self { gamma, lower, upper, step };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Short sales and leverage allowed: `[-1, 2]`, step 0.01.
    pub fn unconstrained(gamma: f64) -> Self {
        Self { gamma, lower: -1.0, upper: 2.0, step: 0.01 }
    }

    /// No short sales: `[0, 1]`, step 0.01.
    pub fn no_short(gamma: f64) -> Self {
        Self { gamma, lower: 0.0, upper: 1.0, step: 0.01 }
    }

    pub fn validate(&self) -> Result<(), PortfolioError> {
        if !(self.gamma > 0.0) || self.gamma == 1.0 || !self.gamma.is_finite() {
            return Err(PortfolioError::Config(format!("gamma must be positive and not 1, got {}", self.gamma)));
        }
        if !(self.lower < self.upper) || !self.lower.is_finite() || !self.upper.is_finite() {
            return Err(PortfolioError::Config(format!("bounds [{}, {}] are not increasing", self.lower, self.upper)));
        }
        if !(self.step > 0.0) || self.step > self.upper - self.lower {
            return Err(PortfolioError::Config(format!("grid step {} does not fit the bounds", self.step)));
        }
        Ok(())
    }

    /// Integer multiples of `step` inside the bounds, ordered by distance from 0
    /// (positive before negative), which is the tie-breaking order.
    pub fn grid(&self) -> Vec<f64> {
        let tol = 1e-9;
        let lo = (self.lower / self.step - tol).ceil() as i64;
        let hi = (self.upper / self.step + tol).floor() as i64;
        let mut idx: Vec<i64> = (lo..=hi).collect();
        idx.sort_by_key(|i| (i.abs(), -i.signum()));
        idx.into_iter().map(|i| i as f64 * self.step).collect()
    }
}

pub fn power_utility(wealth: f64, gamma: f64) -> f64 {
    let e = 1.0 - gamma;
    let powered = if e.fract() == 0.0 && e.abs() <= 32.0 { wealth.powi(e as i32) } else { wealth.powf(e) };
    powered / e
}

/// Gross one-period wealth; written as `e^{r_f} (1 + w (e^y - 1))` so that
/// `y = 0` gives exactly `e^{r_f}` for every weight.
pub fn gross_wealth(weight: f64, y: f64, rf: f64) -> f64 {
    rf.exp() * (1.0 + weight * y.exp_m1())
}

/// Monte-Carlo expected utility of `weight`; `-inf` if any draw wipes out wealth.
pub fn expected_utility(draws: &[f64], weight: f64, rf: f64, gamma: f64) -> f64 {
    let mut sum = 0.0;
    for &y in draws {
        let w = gross_wealth(weight, y, rf);
        if !(w > 0.0) {
            return f64::NEG_INFINITY;
        }
        sum += power_utility(w, gamma);
    }
    sum / draws.len() as f64
}

/// Grid maximizer of the Monte-Carlo expected utility; ties go to the smallest `|w|`.
pub fn optimal_weight(draws: &[f64], rf: f64, cfg: &AllocationConfig) -> Result<f64, PortfolioError> {
    cfg.validate()?;
    if draws.is_empty() {
        return Err(PortfolioError::NoDraws);
    }
    let mut best: Option<(f64, f64)> = None;
    for w in cfg.grid() {
        let u = expected_utility(draws, w, rf, cfg.gamma);
        if u == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, bu)| u > bu) {
            best = Some((w, u));
        }
    }
    best.map(|(w, _)| w).ok_or(PortfolioError::Infeasible { lower: cfg.lower, upper: cfg.upper })
}

/// Realized per-period wealth and utility of a weight sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthPath {
    pub dates: Vec<YearMonth>,
    pub weights: Vec<f64>,
    pub wealth: Vec<f64>,
    pub utility: Vec<f64>,
}

pub fn realized_utility_series(
    dates: &[YearMonth],
    weights: &[f64],
    y: &[f64],
    rf: &[f64],
    gamma: f64,
) -> Result<WealthPath, PortfolioError> {
    let n = dates.len();
    if weights.len() != n || y.len() != n || rf.len() != n {
        return Err(PortfolioError::Length(format!(
            "{n} dates, {} weights, {} returns, {} risk-free rates",
            weights.len(),
            y.len(),
            rf.len()
        )));
    }
    let mut wealth = Vec::with_capacity(n);
    let mut utility = Vec::with_capacity(n);
    for i in 0..n {
        let w = gross_wealth(weights[i], y[i], rf[i]);
        if !(w > 0.0) {
            return Err(PortfolioError::Wiped { date: dates[i], weight: weights[i], wealth: w });
        }
        wealth.push(w);
        utility.push(power_utility(w, gamma));
    }
    Ok(WealthPath { dates: dates.to_vec(), weights: weights.to_vec(), wealth, utility })
}

fn ratio_cer(model: f64, reference: f64, gamma: f64) -> Result<f64, PortfolioError> {
    if model == 0.0 || reference == 0.0 || model.signum() != reference.signum() || !model.is_finite() || !reference.is_finite() {
        return Err(PortfolioError::SignMismatch { model, reference });
    }
    Ok((model / reference).powf(1.0 / (1.0 - gamma)) - 1.0)
}

/// `[sum U_model / sum U_ref]^{1/(1 - gamma)} - 1`.
pub fn cer_aggregate(path: &WealthPath, reference: &WealthPath, gamma: f64) -> Result<f64, PortfolioError> {
    if path.utility.len() != reference.utility.len() {
        return Err(PortfolioError::Length(format!("{} vs {} periods", path.utility.len(), reference.utility.len())));
    }
    ratio_cer(path.utility.iter().sum(), reference.utility.iter().sum(), gamma)
}

pub fn cer_single_period(u_model: f64, u_reference: f64, gamma: f64) -> Result<f64, PortfolioError> {
    ratio_cer(u_model, u_reference, gamma)
}

/// Running `sum log(1 + CER_t)`.
pub fn ccer_series(dates: &[YearMonth], cers: &[f64]) -> Result<Vec<f64>, PortfolioError> {
    if dates.len() != cers.len() {
        return Err(PortfolioError::Length(format!("{} dates for {} CERs", dates.len(), cers.len())));
    }
    let mut acc = 0.0;
    dates
        .iter()
        .zip(cers)
        .map(|(d, c)| {
            if !(*c > -1.0) {
                return Err(PortfolioError::CerBelowMinusOne { date: *d, cer: *c });
            }
            acc += c.ln_1p();
            Ok(acc)
        })
        .collect()
}

/// Single-period CERs of `path` against `reference`.
pub fn single_period_cers(path: &WealthPath, reference: &WealthPath, gamma: f64) -> Result<Vec<f64>, PortfolioError> {
    if path.utility.len() != reference.utility.len() {
        return Err(PortfolioError::Length(format!("{} vs {} periods", path.utility.len(), reference.utility.len())));
    }
    path.utility
        .iter()
        .zip(&reference.utility)
        .map(|(u, r)| cer_single_period(*u, *r, gamma))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dates(n: usize) -> Vec<YearMonth> {
        (0..n).map(|i| YearMonth::new(2001, 1).unwrap().add_months(i as i64)).collect()
    }

    #[test]
    fn grid_order_and_bounds() {
        let g = AllocationConfig::no_short(5.0).grid();
        assert_eq!(g.len(), 101);
        assert_eq!(g[0], 0.0);
        assert!(g.iter().all(|w| (0.0..=1.0).contains(w)));
        let u = AllocationConfig::unconstrained(5.0).grid();
        assert_eq!(u.len(), 301);
        assert_eq!(&u[..3], &[0.0, 0.01, -0.01]);
    }

    #[test]
    fn flat_objective_picks_zero() {
        let cfg = AllocationConfig::unconstrained(5.0);
        assert_eq!(optimal_weight(&[0.0], 0.0, &cfg).unwrap(), 0.0);
        assert_eq!(optimal_weight(&[0.0; 3], 0.003, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn sure_gain_picks_upper_bound() {
        assert_eq!(optimal_weight(&[0.1], 0.0, &AllocationConfig::unconstrained(5.0)).unwrap(), 2.0);
        assert_eq!(optimal_weight(&[0.1], 0.0, &AllocationConfig::no_short(5.0)).unwrap(), 1.0);
    }

    #[test]
    fn infeasible_everywhere() {
        let cfg = AllocationConfig::new(5.0, 1.5, 2.0, 0.5).unwrap();
        // y = -1.5 wipes out any weight above 1 / (1 - e^-1.5) ≈ 1.287
        assert!(matches!(optimal_weight(&[-1.5], 0.0, &cfg), Err(PortfolioError::Infeasible { .. })));
    }

    #[test]
    fn risk_free_rollover() {
        let p = realized_utility_series(&dates(2), &[0.0, 1.0], &[0.3, 0.0], &[0.01, 0.02], 5.0).unwrap();
        assert_eq!(p.wealth, vec![0.01f64.exp(), 0.02f64.exp()]);
        assert!(p.utility.iter().all(|u| *u < 0.0));
    }

    #[test]
    fn wiped_out_short_names_the_date() {
        let d = dates(2);
        let err = realized_utility_series(&d, &[0.0, -1.0], &[0.0, 1.0], &[0.0, 0.0], 5.0).unwrap_err();
        assert!(matches!(err, PortfolioError::Wiped { date, .. } if date == d[1]));
    }

    #[test]
    fn cer_identities() {
        let d = dates(3);
        let p = realized_utility_series(&d, &[0.5, 1.0, -0.2], &[0.02, -0.01, 0.03], &[0.0; 3], 5.0).unwrap();
        assert_eq!(cer_aggregate(&p, &p, 5.0).unwrap(), 0.0);
        let cers = single_period_cers(&p, &p, 5.0).unwrap();
        assert!(ccer_series(&d, &cers).unwrap().iter().all(|c| *c == 0.0));
        let mut scaled = p.clone();
        scaled.utility.iter_mut().for_each(|u| *u *= 1.7);
        let expected = 1.7f64.powf(-0.25) - 1.0;
        assert!((cer_aggregate(&scaled, &p, 5.0).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ccer_constant_and_invalid() {
        let d = dates(4);
        let c = ccer_series(&d, &[0.01; 4]).unwrap();
        assert!((c[3] - 4.0 * 0.01f64.ln_1p()).abs() < 1e-15);
        assert!(matches!(ccer_series(&d, &[0.0, -1.0, 0.0, 0.0]), Err(PortfolioError::CerBelowMinusOne { .. })));
    }

    #[test]
    fn sign_mismatch() {
        assert!(cer_single_period(-1.0, 1.0, 5.0).is_err());
        assert!(cer_single_period(0.0, 0.0, 5.0).is_err());
    }
}
