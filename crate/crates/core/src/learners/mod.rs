//! Base learners fit on one bootstrap replicate and feature subset.

mod linear;
mod logistic;

pub use linear::{fit_ols, LinearModel};
pub use logistic::{
    fit_logistic, fit_logistic_traced, penalized_gradient, penalized_log_likelihood, sigmoid,
    LogisticModel,
};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical settings shared by the base learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// L2 penalty on logistic slopes; the intercept is never penalized.
    pub ridge_jitter: f64,
    pub max_iter: usize,
    pub tol: f64,
    /// Singular values below `svd_rcond * sigma_max` count as zero.
    pub svd_rcond: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            ridge_jitter: 1e-6,
            max_iter: 100,
            tol: 1e-8,
            svd_rcond: 1e-10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ridge_jitter >= 0.0 && self.ridge_jitter.is_finite()) {
            return Err(Error::config("ridge_jitter must be finite and >= 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("max_iter must be >= 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::config("tol must be finite and > 0"));
        }
        if !(self.svd_rcond > 0.0 && self.svd_rcond.is_finite()) {
            return Err(Error::config("svd_rcond must be finite and > 0"));
        }
        Ok(())
    }
}

fn check_inputs(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::data("cannot fit on empty data"));
    }
    if x.nrows() != y.len() {
        return Err(Error::data(format!(
            "{} responses for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite input to fit"));
    }
    Ok(())
}

fn check_feature_indices(indices: &[usize], d: usize) -> Result<()> {
    if indices.len() != d {
        return Err(Error::data(format!(
            "{} feature indices for {d} coefficients",
            indices.len()
        )));
    }
    Ok(())
}

#[inline]
fn dot_subset(
    intercept: f64,
    coefficients: &[f64],
    features: &[usize],
    x: impl Fn(usize) -> f64,
) -> f64 {
    intercept
        + coefficients
            .iter()
            .zip(features)
            .map(|(w, &j)| w * x(j))
            .sum::<f64>()
}
