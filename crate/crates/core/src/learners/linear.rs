use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_feature_indices, check_inputs, dot_subset, FitConfig};
use crate::error::{Error, Result};

/// Multiple linear regression `intercept + sum_k coefficients[k] * x[feature_indices[k]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub feature_indices: Vec<usize>,
}

impl LinearModel {
    /// Re-targets the model at columns of a wider feature row.
    pub fn on_features(mut self, indices: Vec<usize>) -> Result<Self> {
        check_feature_indices(&indices, self.coefficients.len())?;
        self.feature_indices = indices;
        Ok(self)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        dot_subset(
            self.intercept,
            &self.coefficients,
            &self.feature_indices,
            |j| x[j],
        )
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                dot_subset(
                    self.intercept,
                    &self.coefficients,
                    &self.feature_indices,
                    |j| x[(i, j)],
                )
            })
            .collect()
    }
}

/// Least squares with an unpenalized intercept, solved by SVD.
///
/// Columns are centered, the slope vector is the minimum-norm least-squares
/// solution on the centered design (singular values below
/// `svd_rcond * sigma_max` are dropped), and the intercept absorbs the means.
/// A constant column therefore gets slope 0. The model's feature indices are
/// `0..d`; see [`LinearModel::on_features`].
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64], config: &FitConfig) -> Result<LinearModel> {
    check_inputs(x, y)?;
    config.validate()?;
    let (m, d) = x.shape();

    let y_mean = y.iter().sum::<f64>() / m as f64;
    let x_means: Vec<f64> = x.column_iter().map(|c| c.sum() / m as f64).collect();
    let centered = DMatrix::from_fn(m, d, |i, j| x[(i, j)] - x_means[j]);
    let yc = DVector::from_iterator(m, y.iter().map(|v| v - y_mean));

    let svd = centered.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let slopes = if sigma_max > 0.0 {
        let eps = config.svd_rcond * sigma_max;
        svd.solve(&yc, eps)
            .map_err(|e| Error::numeric(format!("svd solve: {e}")))?
    } else {
        DVector::zeros(d)
    };

    let intercept = y_mean - slopes.iter().zip(&x_means).map(|(b, m)| b * m).sum::<f64>();
    if !intercept.is_finite() || slopes.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(
            "least squares produced non-finite coefficients",
        ));
    }
    Ok(LinearModel {
        intercept,
        coefficients: slopes.iter().copied().collect(),
        feature_indices: (0..d).collect(),
    })
}
