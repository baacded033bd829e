mod common;

use common::*;
use drs_core::baselines::{
    bma_step, equal_weight_pool, historical_average, lambda_grid, lambda_max, lasso_fit, lasso_loo_select, lasso_predictive_density,
    pc_regression_density, pca_decompose, BmaState,
};
use drs_core::{DiscountConfig, StudentT};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

#[test]
fn historical_average_of_standard_normals() {
    let mut r = rng(1);
    let y: Vec<f64> = (0..100).map(|_| normal(&mut r)).collect();
    let d = historical_average(&y).unwrap();
    assert!(d.location().abs() < 3.0 / 10.0);
    assert_eq!(d.dof(), 99.0);
}

#[test]
fn bma_weights_are_normalized_likelihood_products() {
    let mut r = rng(2);
    let mut state = BmaState::uniform(3);
    let mut products = [1.0f64; 3];
    for _ in 0..30 {
        let dens: Vec<StudentT> = (0..3).map(|_| StudentT::new(5.0, 0.5 * normal(&mut r), 0.5 + normal(&mut r).abs()).unwrap()).collect();
        let y = normal(&mut r);
        let mix: f64 = (0..3).map(|j| products[j] / products.iter().sum::<f64>() * dens[j].pdf(y)).sum();
        let (next, score) = bma_step(&state, &dens, y).unwrap();
        assert!((score - mix.ln()).abs() < 1e-12);
        for (j, p) in products.iter_mut().enumerate() {
            *p *= dens[j].pdf(y);
        }
        let total: f64 = products.iter().sum();
        for j in 0..3 {
            assert!((next.weights()[j] - products[j] / total).abs() < 1e-12);
        }
        state = next;
    }
}

#[test]
fn noise_free_data_drives_loo_error_to_zero() {
    let mut r = rng(3);
    let x = DMatrix::from_fn(40, 4, |_, _| normal(&mut r));
    let y: Vec<f64> = (0..40).map(|i| 1.0 + 2.0 * x[(i, 0)] - x[(i, 3)]).collect();
    let grid = lambda_grid(lambda_max(&x, &y), 100, 1e-4);
    let sel = lasso_loo_select(&x, &y, &grid).unwrap();
    let best = grid.iter().position(|l| *l == sel.lambda).unwrap();
    assert!(sel.loo_mse[best] < 1e-6 * variance(&y), "loo mse {}", sel.loo_mse[best]);
    assert!(best >= 95, "selected grid index {best}");
}

#[test]
fn pure_noise_selects_the_empty_model() {
    let mut empty = 0;
    for seed in 0..20 {
        let mut r = rng(100 + seed);
        let (n, p) = (25, 20);
        let x = DMatrix::from_fn(n, p, |_, _| normal(&mut r));
        let y: Vec<f64> = (0..n).map(|_| normal(&mut r)).collect();
        let grid = lambda_grid(lambda_max(&x, &y), 100, 1e-4);
        let sel = lasso_loo_select(&x, &y, &grid).unwrap();
        let fit = lasso_fit(&x, &y, sel.lambda).unwrap();
        if fit.active() == 0 {
            empty += 1;
        }
    }
    assert!(empty > 10, "{empty}/20 selections were the empty model");
}

#[test]
fn lasso_interval_coverage() {
    let mut r = rng(4);
    let mut covered = 0;
    let reps = 500;
    for _ in 0..reps {
        let (n, p) = (60, 5);
        let x = DMatrix::from_fn(n + 1, p, |_, _| normal(&mut r));
        let y: Vec<f64> = (0..=n).map(|i| 0.3 + x[(i, 0)] - 0.5 * x[(i, 1)] + normal(&mut r)).collect();
        let train = x.rows(0, n).into_owned();
        let grid = lambda_grid(lambda_max(&train, &y[..n]), 30, 1e-3);
        let sel = lasso_loo_select(&train, &y[..n], &grid).unwrap();
        let fit = lasso_fit(&train, &y[..n], sel.lambda).unwrap();
        let x_new: Vec<f64> = x.row(n).iter().copied().collect();
        let d = lasso_predictive_density(&fit, &x_new);
        let u = StudentsT::new(d.location(), d.scale().sqrt(), d.dof()).unwrap().cdf(y[n]);
        if (0.05..=0.95).contains(&u) {
            covered += 1;
        }
    }
    let rate = covered as f64 / reps as f64;
    assert!((0.85..=0.95).contains(&rate), "coverage {rate}");
}

#[test]
fn second_factor_improves_held_out_error() {
    let mut r = rng(5);
    let (n, p) = (300, 10);
    let f: Vec<[f64; 2]> = (0..n).map(|_| [2.0 * normal(&mut r), normal(&mut r)]).collect();
    let x = DMatrix::from_fn(n, p, |t, j| f[t][0] * (1.0 + 0.1 * j as f64) + f[t][1] * if j % 2 == 0 { 1.0 } else { -1.0 } + 0.3 * normal(&mut r));
    let y: Vec<f64> = (0..n).map(|t| f[t][0] + 2.0 * f[t][1] + 0.3 * normal(&mut r)).collect();
    let split = 200;
    let window = x.rows(0, split).into_owned();
    let disc = DiscountConfig::new(1.0, 1.0).unwrap();
    let mse = |k: usize| {
        let model = pca_decompose(&window, k).unwrap();
        (split..n)
            .map(|t| {
                let row: Vec<f64> = x.row(t).iter().copied().collect();
                let d = pc_regression_density(&model, &window, &y[..split], &row, 1, 10.0, 0.01, &disc).unwrap();
                (y[t] - d.location()).powi(2)
            })
            .sum::<f64>()
            / (n - split) as f64
    };
    let (one, two) = (mse(1), mse(2));
    assert!(two < one, "two factors {two} vs one {one}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bma_weights_stay_on_the_simplex(seed in any::<u64>(), j in 1usize..6) {
        let mut r = rng(seed);
        let mut s = BmaState::uniform(j);
        for _ in 0..50 {
            let dens: Vec<StudentT> = (0..j).map(|_| StudentT::new(4.0, 3.0 * normal(&mut r), 0.01 + normal(&mut r).abs()).unwrap()).collect();
            s = bma_step(&s, &dens, 2.0 * normal(&mut r)).unwrap().0;
            let total: f64 = s.weights().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(s.weights().iter().all(|w| *w >= 0.0));
        }
    }

    #[test]
    fn pool_score_ignores_agent_order(
        locs in prop::collection::vec(-3.0f64..3.0, 1..6).prop_shuffle(),
        y in -4.0f64..4.0,
    ) {
        let dens: Vec<StudentT> = locs.iter().map(|l| StudentT::new(5.0, *l, 0.5 + l.abs()).unwrap()).collect();
        let mut sorted = dens.clone();
        sorted.sort_by(|a, b| a.location().total_cmp(&b.location()));
        let (a, _) = equal_weight_pool(&dens, y);
        let (b, _) = equal_weight_pool(&sorted, y);
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pca_scores_centered_and_loadings_orthonormal(seed in any::<u64>(), n in 12usize..60, p in 2usize..8) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, p, |_, j| 5.0 * j as f64 + (1.0 + j as f64) * normal(&mut r));
        let k = p.min(3);
        let m = pca_decompose(&x, k).unwrap();
        let gram = m.loadings.tr_mul(&m.loadings);
        prop_assert!((gram - DMatrix::identity(k, k)).amax() < 1e-10);
        let scores = m.scores(&x);
        for c in 0..k {
            prop_assert!(scores.column(c).mean().abs() < 1e-10);
        }
    }

    #[test]
    fn lasso_objective_never_beaten_by_perturbation(seed in any::<u64>(), frac in 0.001f64..1.0) {
        let mut r = rng(seed);
        let (n, p) = (30, 6);
        let x = DMatrix::from_fn(n, p, |_, _| normal(&mut r));
        let y: Vec<f64> = (0..n).map(|i| x[(i, 0)] - x[(i, 1)] + normal(&mut r)).collect();
        let lambda = frac * lambda_max(&x, &y);
        let fit = lasso_fit(&x, &y, lambda).unwrap();
        let objective = |b0: f64, b: &nalgebra::DVector<f64>| {
            let rss: f64 = (0..n).map(|i| (y[i] - b0 - x.row(i).transpose().dot(b)).powi(2)).sum();
            rss / (2.0 * n as f64) + lambda * b.abs().sum()
        };
        let best = objective(fit.intercept, &fit.coefficients);
        for _ in 0..20 {
            let mut b = fit.coefficients.clone();
            let j = r.random_range(0..p);
            b[j] += 0.01 * normal(&mut r);
            prop_assert!(objective(fit.intercept, &b) >= best - 1e-12);
        }
    }
}

