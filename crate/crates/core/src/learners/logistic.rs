use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{check_feature_indices, check_inputs, dot_subset, FitConfig};
use crate::error::{Error, Result};

const PROB_CLIP: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;

/// Binary logistic regression on a feature subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub feature_indices: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^eta)` without overflow.
#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn on_features(mut self, indices: Vec<usize>) -> Result<Self> {
        check_feature_indices(&indices, self.coefficients.len())?;
        self.feature_indices = indices;
        Ok(self)
    }

    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        dot_subset(
            self.intercept,
            &self.coefficients,
            &self.feature_indices,
            |j| x[j],
        )
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(x))
    }

    /// Class 1 iff the fitted probability is at least 0.5.
    pub fn predict_class(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x) >= 0.5)
    }

    pub fn predict_proba_matrix(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                sigmoid(dot_subset(
                    self.intercept,
                    &self.coefficients,
                    &self.feature_indices,
                    |j| x[(i, j)],
                ))
            })
            .collect()
    }
}

/// `sum_i [y_i eta_i - log(1 + e^eta_i)] - ridge/2 * |slopes|^2`.
pub fn penalized_log_likelihood(
    x: &DMatrix<f64>,
    y: &[f64],
    intercept: f64,
    slopes: &[f64],
    ridge: f64,
) -> f64 {
    let eta = x * DVector::from_column_slice(slopes);
    let loglik: f64 = eta
        .iter()
        .zip(y)
        .map(|(e, &yi)| {
            let e = e + intercept;
            yi * e - softplus(e)
        })
        .sum();
    loglik - 0.5 * ridge * slopes.iter().map(|b| b * b).sum::<f64>()
}

/// Gradient of [`penalized_log_likelihood`], intercept component first.
pub fn penalized_gradient(
    x: &DMatrix<f64>,
    y: &[f64],
    intercept: f64,
    slopes: &[f64],
    ridge: f64,
) -> Vec<f64> {
    let eta = x * DVector::from_column_slice(slopes);
    let resid = DVector::from_iterator(
        y.len(),
        eta.iter()
            .zip(y)
            .map(|(e, &yi)| yi - sigmoid(e + intercept)),
    );
    let slope_grad = x.tr_mul(&resid);
    std::iter::once(resid.sum())
        .chain(slope_grad.iter().zip(slopes).map(|(g, b)| g - ridge * b))
        .collect()
}

/// Fits by IRLS. See [`fit_logistic_traced`].
pub fn fit_logistic(x: &DMatrix<f64>, labels: &[f64], config: &FitConfig) -> Result<LogisticModel> {
    fit_logistic_traced(x, labels, config).map(|(model, _)| model)
}

/// Fits by penalized IRLS, returning the objective after every accepted
/// iteration (the first entry is the objective at the zero start).
///
/// Newton steps that lower the objective are halved up to 30 times. The fit
/// is converged once an iteration gains less than `config.tol`. When the
/// design has at least as many columns as rows and the ridge is positive,
/// the problem is solved exactly in the row space of `x`, which keeps
/// `p >> n` fits cheap.
pub fn fit_logistic_traced(
    x: &DMatrix<f64>,
    labels: &[f64],
    config: &FitConfig,
) -> Result<(LogisticModel, Vec<f64>)> {
    check_inputs(x, labels)?;
    config.validate()?;
    let (m, d) = x.shape();
    if m < 2 {
        return Err(Error::data("logistic fit needs at least 2 rows"));
    }
    if labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::data("logistic labels must be 0 or 1"));
    }
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(Error::data("degenerate labels: only one class present"));
    }

    let ridge = config.ridge_jitter;
    let (fit, slopes) = if d >= m && ridge > 0.0 {
        // slopes live in the row space of x: x = U S V^T, slopes = V c
        let svd = x.clone().svd(true, true);
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let sigma_max = svd.singular_values.max();
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > config.svd_rcond * sigma_max)
            .collect();
        let reduced = DMatrix::from_fn(m, keep.len(), |i, c| {
            u[(i, keep[c])] * svd.singular_values[keep[c]]
        });
        let fit = irls(&reduced, labels, config)?;
        let mut slopes = vec![0.0; d];
        for (c, &k) in keep.iter().enumerate() {
            for (j, s) in slopes.iter_mut().enumerate() {
                *s += v_t[(k, j)] * fit.theta[c + 1];
            }
        }
        (fit, slopes)
    } else {
        let fit = irls(x, labels, config)?;
        let slopes = fit.theta.iter().skip(1).copied().collect();
        (fit, slopes)
    };

    let model = LogisticModel {
        intercept: fit.theta[0],
        coefficients: slopes,
        feature_indices: (0..d).collect(),
        converged: fit.converged,
        iterations: fit.iterations,
    };
    if !model.intercept.is_finite() || model.coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(
            "logistic fit produced non-finite coefficients",
        ));
    }
    Ok((model, fit.trace))
}

struct IrlsFit {
    /// Intercept followed by slopes.
    theta: Vec<f64>,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
}

fn irls(x: &DMatrix<f64>, y: &[f64], config: &FitConfig) -> Result<IrlsFit> {
    let (m, d) = x.shape();
    let k = d + 1;
    let ridge = config.ridge_jitter;
    let design = DMatrix::from_fn(m, k, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let yv = DVector::from_column_slice(y);

    let objective = |theta: &DVector<f64>| -> f64 {
        let eta = &design * theta;
        let loglik: f64 = eta
            .iter()
            .zip(y)
            .map(|(e, &yi)| yi * e - softplus(*e))
            .sum();
        loglik - 0.5 * ridge * theta.rows(1, d).norm_squared()
    };

    let mut theta = DVector::zeros(k);
    let mut current = objective(&theta);
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let eta = &design * &theta;
        let probs = eta.map(sigmoid);
        let mut grad = design.tr_mul(&(&yv - &probs));
        for j in 1..k {
            grad[j] -= ridge * theta[j];
        }

        let mut weighted = design.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            let p = probs[i].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            row *= p * (1.0 - p);
        }
        let mut hessian = design.tr_mul(&weighted);
        for j in 1..k {
            hessian[(j, j)] += ridge;
        }
        let step = newton_direction(hessian, &grad, config.svd_rcond)?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &theta + &step * scale;
            let value = objective(&candidate);
            if value.is_finite() && value >= current {
                accepted = Some((candidate, value));
                break;
            }
            scale *= 0.5;
        }
        let Some((candidate, value)) = accepted else {
            // no ascent along the Newton direction: numerically stationary
            converged = true;
            break;
        };
        let gain = value - current;
        theta = candidate;
        current = value;
        trace.push(current);
        if gain < config.tol {
            converged = true;
            break;
        }
    }

    Ok(IrlsFit {
        theta: theta.iter().copied().collect(),
        converged,
        iterations,
        trace,
    })
}

fn newton_direction(
    hessian: DMatrix<f64>,
    grad: &DVector<f64>,
    rcond: f64,
) -> Result<DVector<f64>> {
    if let Some(chol) = hessian.clone().cholesky() {
        return Ok(chol.solve(grad));
    }
    let svd = hessian.svd(true, true);
    let eps = rcond * svd.singular_values.max();
    svd.solve(grad, eps)
        .map_err(|e| Error::numeric(format!("irls step: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn col(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(values.len(), 1, values)
    }

    #[test]
    fn balanced_constant_feature() {
        let x = col(&[2.0; 6]);
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        let m = fit_logistic(&x, &y, &FitConfig::default()).unwrap();
        assert!(m.intercept.abs() < 1e-6, "{}", m.intercept);
        assert!(m.coefficients[0].abs() < 1e-6, "{}", m.coefficients[0]);
        assert!(m.converged);
    }

    #[test]
    fn separated_data_stays_finite() {
        let x = col(&[-1.0, -1.0, 1.0, 1.0]);
        let y = [0.0, 0.0, 1.0, 1.0];
        let cfg = FitConfig::default();
        let m = fit_logistic(&x, &y, &cfg).unwrap();
        assert!(m.converged, "iterations {}", m.iterations);
        assert!(m.iterations <= cfg.max_iter);
        assert!(m.coefficients[0].is_finite() && m.coefficients[0] > 5.0);
        // stationarity of the penalized objective bounds the slope
        assert!(m.coefficients[0] < 30.0);
    }

    #[test]
    fn degenerate_labels_rejected() {
        let err = fit_logistic(&col(&[1.0, 2.0]), &[1.0, 1.0], &FitConfig::default()).unwrap_err();
        assert!(err.to_string().contains("degenerate labels"));
        assert!(fit_logistic(&col(&[1.0]), &[1.0], &FitConfig::default()).is_err());
        assert!(fit_logistic(
            &col(&[1.0, f64::INFINITY]),
            &[0.0, 1.0],
            &FitConfig::default()
        )
        .is_err());
    }

    #[test]
    fn probability_link() {
        let zero = LogisticModel {
            intercept: 0.0,
            coefficients: vec![0.0],
            feature_indices: vec![0],
            converged: true,
            iterations: 0,
        };
        assert_eq!(zero.predict_proba(&[5.0]), 0.5);
        assert_eq!(zero.predict_class(&[5.0]), 1);

        let big = LogisticModel {
            intercept: 40.0,
            ..zero.clone()
        };
        assert!(big.predict_proba(&[0.0]) >= 1.0 - 1e-9);

        let m = LogisticModel {
            intercept: 0.3,
            ..zero.clone()
        };
        let by_hand = 1.0 / (1.0 + (-0.3f64).exp());
        assert!((m.predict_proba(&[0.0]) - by_hand).abs() < 1e-15);

        let below = LogisticModel {
            intercept: (0.49f64 / 0.51).ln(),
            ..zero
        };
        assert!((below.predict_proba(&[0.0]) - 0.49).abs() < 1e-12);
        assert_eq!(below.predict_class(&[0.0]), 0);
    }

    #[test]
    fn class_agrees_with_linear_predictor_sign() {
        let mut rng = RngStream::derive(8, &[1]);
        let m = LogisticModel {
            intercept: 0.2,
            coefficients: vec![1.5, -0.7],
            feature_indices: vec![0, 2],
            converged: true,
            iterations: 1,
        };
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| 3.0 * rng.next_gaussian()).collect();
            assert_eq!(m.predict_class(&x) == 1, m.linear_predictor(&x) >= 0.0);
        }
    }

    #[test]
    fn objective_never_decreases() {
        let mut rng = RngStream::derive(3, &[1]);
        for _ in 0..20 {
            let x = DMatrix::from_fn(40, 3, |_, _| rng.next_gaussian());
            let y: Vec<f64> = (0..40)
                .map(|i| f64::from(rng.next_uniform() < sigmoid(2.0 * x[(i, 0)] - x[(i, 1)])))
                .collect();
            let (_, trace) = fit_logistic_traced(&x, &y, &FitConfig::default()).unwrap();
            assert!(trace.windows(2).all(|w| w[1] >= w[0]), "{trace:?}");
        }
    }

    #[test]
    fn wide_design_matches_gradient_condition() {
        let mut rng = RngStream::derive(4, &[1]);
        let x = DMatrix::from_fn(12, 30, |_, _| rng.next_gaussian());
        let y: Vec<f64> = (0..12).map(|i| f64::from(x[(i, 0)] > 0.0)).collect();
        let cfg = FitConfig {
            ridge_jitter: 0.5,
            ..FitConfig::default()
        };
        let m = fit_logistic(&x, &y, &cfg).unwrap();
        assert!(m.converged);
        let g = penalized_gradient(&x, &y, m.intercept, &m.coefficients, cfg.ridge_jitter);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-6, "gradient norm {norm}");
    }
}
