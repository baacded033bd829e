use super::BaselineError;
use crate::density::StudentT;
use crate::dlm::{run_expanding_filter, DiscountConfig, DlmPosterior};
use crate::data::{SupervisedSlice, YearMonth};
use nalgebra::{DMatrix, DVector};

/// Principal components of a standardized window.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub n_factors: usize,
    /// `p x n_factors`, orthonormal columns.
    pub loadings: DMatrix<f64>,
    pub means: DVector<f64>,
    pub scales: DVector<f64>,
    /// Share of total standardized variance explained by each retained factor.
    pub explained: Vec<f64>,
}

impl FactorModel {
    /// Factor scores of each row of `x`.
    pub fn scores(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.standardize(x) * &self.loadings
    }

    pub fn score_row(&self, x: &[f64]) -> DVector<f64> {
        let z = DVector::from_fn(x.len(), |j, _| (x[j] - self.means[j]) / self.scales[j]);
        self.loadings.tr_mul(&z)
    }

    fn standardize(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut z = x.clone();
        for j in 0..x.ncols() {
            let (m, s) = (self.means[j], self.scales[j]);
            z.column_mut(j).apply(|v| *v = (*v - m) / s);
        }
        z
    }
}

/// Leading right singular vectors of the column-standardized window `x`.
/// Zero-variance columns are centered but left unscaled.
pub fn pca_decompose(x: &DMatrix<f64>, n_factors: usize) -> Result<FactorModel, BaselineError> {
    let (n, p) = (x.nrows(), x.ncols());
    if n_factors == 0 || n_factors > p.min(n) {
        return Err(BaselineError::Shape(format!("{n_factors} factors requested from a {n}x{p} window")));
    }
    let means = DVector::from_fn(p, |j, _| x.column(j).mean());
    let scales = DVector::from_fn(p, |j, _| {
        let sd = (x.column(j).iter().map(|v| (v - means[j]).powi(2)).sum::<f64>() / (n - 1).max(1) as f64).sqrt();
        if sd > 0.0 {
            sd
        } else {
            1.0
        }
    });
    let mut model = FactorModel {
        n_factors,
        loadings: DMatrix::zeros(p, n_factors),
        means,
        scales,
        explained: Vec::new(),
    };
    let z = model.standardize(x);
    let svd = z.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let top = svd.singular_values[idx[0]];
    let rank = idx.iter().filter(|&&i| svd.singular_values[i] > 1e-10 * top.max(f64::MIN_POSITIVE)).count();
    if top <= 0.0 || rank < n_factors {
        return Err(BaselineError::RankDeficient { rank: if top > 0.0 { rank } else { 0 }, requested: n_factors });
    }
    for (k, &i) in idx.iter().take(n_factors).enumerate() {
        let mut col = v_t.row(i).transpose();
        // sign convention: largest-magnitude loading positive
        let lead = col.iamax();
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        model.loadings.set_column(k, &col);
        model.explained.push(svd.singular_values[i].powi(2) / total);
    }
    Ok(model)
}

/// Principal-component regression forecast: factors estimated on `x_window`
/// (regressor rows aligned with `y_window`), a DLM with intercept run on the
/// factor scores, then the density at regressors `x_new` for a target
/// `steps` periods past the last row.
#[allow(clippy::too_many_arguments)]
pub fn pc_regression_density(
    model: &FactorModel,
    x_window: &DMatrix<f64>,
    y_window: &[f64],
    x_new: &[f64],
    steps: usize,
    prior_n0: f64,
    prior_s0: f64,
    disc: &DiscountConfig,
) -> Result<StudentT, BaselineError> {
    if x_window.nrows() != y_window.len() || y_window.is_empty() {
        return Err(BaselineError::Shape("factor window and targets disagree".into()));
    }
    let scores = model.scores(x_window);
    let k = model.n_factors;
    let mut design = DMatrix::from_element(y_window.len(), k + 1, 1.0);
    design.view_mut((0, 1), (y_window.len(), k)).copy_from(&scores);
    let base = YearMonth::new(2000, 1).expect("valid date");
    let slice = SupervisedSlice {
        name: "pca".into(),
        horizon: 1,
        intercept: true,
        dates: (0..y_window.len()).map(|i| base.add_months(i as i64)).collect(),
        target: y_window.to_vec(),
        design,
    };
    let prior = DlmPosterior::default_prior(k + 1, prior_n0, prior_s0)?;
    let filtered = run_expanding_filter(&slice, &prior, disc)?;
    let post = &filtered.last().expect("non-empty window").posterior;
    let f = DVector::from_iterator(k + 1, std::iter::once(1.0).chain(model.score_row(x_new).iter().copied()));
    Ok(post.forecast(&f, steps, disc)?)
}
