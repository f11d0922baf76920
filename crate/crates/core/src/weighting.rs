//! Feature-selection weights from feature/response association scores.
//!
//! Each scheme produces a non-negative raw score per feature; scores are then
//! normalized to a probability vector. When every score is zero the uniform
//! vector is used instead.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Task;
use crate::error::{Error, Result};

/// Stand-in for an infinite F statistic (perfect separation, `r^2 = 1`).
pub const F_CAP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    Correlation,
    #[serde(rename = "fstat")]
    FStatistic,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Uniform => "uniform",
            Scheme::Correlation => "correlation",
            Scheme::FStatistic => "fstat",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Scheme::Uniform),
            "correlation" | "corr" => Ok(Scheme::Correlation),
            "fstat" | "f-statistic" => Ok(Scheme::FStatistic),
            other => Err(Error::config(format!("unknown weighting scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWeights {
    pub weights: Vec<f64>,
    pub scheme: Scheme,
}

impl FeatureWeights {
    /// Normalizes non-negative raw scores; falls back to uniform if they sum to 0.
    pub fn from_scores(scores: &[f64], scheme: Scheme) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::data("weights need at least one feature"));
        }
        if scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::numeric(
                "raw feature scores must be finite and non-negative",
            ));
        }
        let total: f64 = scores.iter().sum();
        let weights = if total > 0.0 {
            scores.iter().map(|s| s / total).collect()
        } else {
            vec![1.0 / scores.len() as f64; scores.len()]
        };
        Ok(FeatureWeights { weights, scheme })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn uniform_weights(p: usize) -> Result<FeatureWeights> {
    if p == 0 {
        return Err(Error::data("uniform weights need p >= 1"));
    }
    Ok(FeatureWeights {
        weights: vec![1.0 / p as f64; p],
        scheme: Scheme::Uniform,
    })
}

fn check_shape(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::data(format!(
            "{} response values for {} rows",
            y.len(),
            x.nrows()
        )));
    }
    if x.nrows() < 3 {
        return Err(Error::data(format!(
            "feature scoring needs at least 3 rows, got {}",
            x.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::data("no features to score"));
    }
    Ok(())
}

fn is_constant(values: impl IntoIterator<Item = f64>) -> bool {
    let mut it = values.into_iter();
    match it.next() {
        Some(first) => it.all(|v| v == first),
        None => true,
    }
}

/// Squared Pearson correlation of every column with `y`.
///
/// Exactly constant columns, or an exactly constant `y`, score 0.
pub fn squared_correlations(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    check_shape(x, y)?;
    let n = y.len() as f64;
    if is_constant(y.iter().copied()) {
        return Ok(vec![0.0; x.ncols()]);
    }
    let y_mean = y.iter().sum::<f64>() / n;
    let y_dev: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let syy: f64 = y_dev.iter().map(|d| d * d).sum();

    Ok(x.column_iter()
        .map(|col| {
            if is_constant(col.iter().copied()) {
                return 0.0;
            }
            let mean = col.sum() / n;
            let (mut sxx, mut sxy) = (0.0, 0.0);
            for (v, dy) in col.iter().zip(&y_dev) {
                let dx = v - mean;
                sxx += dx * dx;
                sxy += dx * dy;
            }
            if sxx <= 0.0 {
                return 0.0;
            }
            ((sxy * sxy) / (sxx * syy)).clamp(0.0, 1.0)
        })
        .collect())
}

pub fn correlation_weights(x: &DMatrix<f64>, y: &[f64]) -> Result<FeatureWeights> {
    let scores = squared_correlations(x, y)?;
    FeatureWeights::from_scores(&scores, Scheme::Correlation)
}

/// One-way ANOVA F statistic of each column against the binary class label.
pub fn anova_f_scores(x: &DMatrix<f64>, labels: &[f64]) -> Result<Vec<f64>> {
    check_shape(x, labels)?;
    let n1 = labels.iter().filter(|&&l| l == 1.0).count();
    let n0 = labels.iter().filter(|&&l| l == 0.0).count();
    if n0 + n1 != labels.len() {
        return Err(Error::data("class labels must be 0 or 1"));
    }
    if n0 == 0 || n1 == 0 {
        return Err(Error::data(
            "F-statistic weighting needs both classes present",
        ));
    }
    let n = labels.len();
    let df_within = (n - 2) as f64;

    Ok(x.column_iter()
        .map(|col| {
            let (mut sum0, mut sum1) = (0.0, 0.0);
            for (v, &l) in col.iter().zip(labels) {
                if l == 1.0 {
                    sum1 += v;
                } else {
                    sum0 += v;
                }
            }
            let mean0 = sum0 / n0 as f64;
            let mean1 = sum1 / n1 as f64;
            let grand = (sum0 + sum1) / n as f64;

            let group = |class: f64| col.iter().zip(labels).filter(move |(_, &l)| l == class);
            let const0 = is_constant(group(0.0).map(|(v, _)| *v));
            let const1 = is_constant(group(1.0).map(|(v, _)| *v));
            if const0 && const1 {
                // within-group variance is zero: either no signal at all or
                // perfect separation
                let first0 = group(0.0).next().map(|(v, _)| *v);
                let first1 = group(1.0).next().map(|(v, _)| *v);
                return if first0 == first1 { 0.0 } else { F_CAP };
            }

            let ssb = n0 as f64 * (mean0 - grand).powi(2) + n1 as f64 * (mean1 - grand).powi(2);
            let ssw: f64 = col
                .iter()
                .zip(labels)
                .map(|(v, &l)| {
                    let m = if l == 1.0 { mean1 } else { mean0 };
                    (v - m).powi(2)
                })
                .sum();
            if ssb <= 0.0 {
                return 0.0;
            }
            if ssw <= 0.0 {
                return F_CAP;
            }
            (ssb / (ssw / df_within)).min(F_CAP)
        })
        .collect())
}

pub fn fstat_weights_classification(x: &DMatrix<f64>, labels: &[f64]) -> Result<FeatureWeights> {
    let scores = anova_f_scores(x, labels)?;
    FeatureWeights::from_scores(&scores, Scheme::FStatistic)
}

/// Univariate-regression F statistic `(n - 2) r^2 / (1 - r^2)` per column.
pub fn regression_f_scores(x: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    let df = (y.len() as f64) - 2.0;
    Ok(squared_correlations(x, y)?
        .into_iter()
        .map(|r2| {
            if r2 <= 0.0 {
                0.0
            } else if r2 >= 1.0 {
                F_CAP
            } else {
                (df * r2 / (1.0 - r2)).min(F_CAP)
            }
        })
        .collect())
}

pub fn fstat_weights_regression(x: &DMatrix<f64>, y: &[f64]) -> Result<FeatureWeights> {
    let scores = regression_f_scores(x, y)?;
    FeatureWeights::from_scores(&scores, Scheme::FStatistic)
}

/// Weights for `scheme`, dispatching the F statistic on the task.
pub fn compute_weights(
    scheme: Scheme,
    task: Task,
    x: &DMatrix<f64>,
    y: &[f64],
) -> Result<FeatureWeights> {
    match (scheme, task) {
        (Scheme::Uniform, _) => uniform_weights(x.ncols()),
        (Scheme::Correlation, _) => correlation_weights(x, y),
        (Scheme::FStatistic, Task::Regression) => fstat_weights_regression(x, y),
        (Scheme::FStatistic, Task::Classification) => fstat_weights_classification(x, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook Pearson correlation, kept separate from the scoring path.
    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        let sab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let saa: f64 = a.iter().map(|x| x * x).sum();
        let sbb: f64 = b.iter().map(|x| x * x).sum();
        (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
    }

    fn matrix(cols: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(cols[0].len(), cols.len(), |i, j| cols[j][i])
    }

    #[test]
    fn uniform_cases() {
        assert_eq!(uniform_weights(4).unwrap().weights, vec![0.25; 4]);
        assert_eq!(uniform_weights(1).unwrap().weights, vec![1.0]);
        let total: f64 = uniform_weights(1000).unwrap().weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(uniform_weights(0).is_err());
    }

    #[test]
    fn correlation_hand_example() {
        let x1 = [1.0, 2.0, 3.0, 4.0];
        let x2 = [1.0, -1.0, 1.0, -1.0];
        let y = [2.0, 4.0, 6.0, 8.0];
        let r2 = pearson(&x2, &y);
        assert!((r2 - (-4.0 / 80f64.sqrt())).abs() < 1e-12);
        let scores = squared_correlations(&matrix(&[&x1, &x2]), &y).unwrap();
        assert!((scores[0] - 1.0).abs() < 1e-12);
        assert!((scores[1] - 0.2).abs() < 1e-12);
        let w = correlation_weights(&matrix(&[&x1, &x2]), &y).unwrap();
        assert!((w.weights[0] - 1.0 / 1.2).abs() < 1e-12);
        assert!((w.weights[1] - 0.2 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn correlation_constant_and_duplicate_columns() {
        let y = [1.0, 3.0, 2.0, 5.0];
        let x = matrix(&[
            &[0.3, 0.3, 0.3, 0.3],
            &[1.0, 2.0, 2.5, 4.0],
            &[1.0, 2.0, 2.5, 4.0],
        ]);
        let w = correlation_weights(&x, &y).unwrap();
        assert_eq!(w.weights[0], 0.0);
        assert_eq!(w.weights[1], w.weights[2]);
        let flat_y = correlation_weights(&x, &[2.0; 4]).unwrap();
        assert_eq!(flat_y.weights, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn correlation_needs_three_rows() {
        assert!(correlation_weights(&matrix(&[&[1.0, 2.0]]), &[1.0, 2.0]).is_err());
    }

    /// Hand one-way ANOVA: group sums of squares over explicit group lists.
    fn anova_oracle(groups: &[&[f64]]) -> f64 {
        let all: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
        let grand = all.iter().sum::<f64>() / all.len() as f64;
        let mut ssb = 0.0;
        let mut ssw = 0.0;
        for g in groups {
            let m = g.iter().sum::<f64>() / g.len() as f64;
            ssb += g.len() as f64 * (m - grand).powi(2);
            ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
        }
        let k = groups.len() as f64;
        (ssb / (k - 1.0)) / (ssw / (all.len() as f64 - k))
    }

    #[test]
    fn anova_hand_example() {
        let expected = anova_oracle(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        assert!((expected - 13.5).abs() < 1e-12);
        let x = matrix(&[&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]);
        let labels = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let f = anova_f_scores(&x, &labels).unwrap();
        assert!((f[0] - 13.5).abs() < 1e-12);
    }

    #[test]
    fn anova_degenerate_conventions() {
        let labels = [0.0, 0.0, 1.0, 1.0];
        let x = matrix(&[&[7.0; 4], &[0.0, 0.0, 1.0, 1.0], &[0.5, 1.0, 0.7, 0.9]]);
        let f = anova_f_scores(&x, &labels).unwrap();
        assert_eq!(f[0], 0.0);
        assert_eq!(f[1], F_CAP);
        let w = fstat_weights_classification(&x, &labels).unwrap();
        assert!(w.weights[1] > 1.0 - 1e-9);
        assert!(anova_f_scores(&x, &[0.0; 4]).is_err());
    }

    #[test]
    fn regression_f_examples() {
        // r^2 = 0.2 at n = 4
        let x = matrix(&[
            &[1.0, -1.0, 1.0, -1.0],
            &[3.0, 1.0, 4.0, 2.0],
            &[5.0, 6.0, 7.0, 8.0],
        ]);
        let y = [2.0, 4.0, 6.0, 8.0];
        let f = regression_f_scores(&x, &y).unwrap();
        assert!((f[0] - 0.5).abs() < 1e-12);
        assert_eq!(f[2], F_CAP);
        let null = regression_f_scores(&matrix(&[&[1.0, -1.0, -1.0, 1.0]]), &y).unwrap();
        assert_eq!(null[0], 0.0);
    }

    fn random_problem() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize)> {
        (4usize..12, 1usize..5).prop_flat_map(|(n, p)| {
            (
                prop::collection::vec(-10.0f64..10.0, n * p),
                prop::collection::vec(-10.0f64..10.0, n),
                Just(p),
            )
        })
    }

    proptest! {
        #[test]
        fn weights_are_a_distribution((xs, y, p) in random_problem()) {
            let n = y.len();
            let x = DMatrix::from_vec(n, p, xs);
            let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            for w in [
                correlation_weights(&x, &y).unwrap(),
                fstat_weights_regression(&x, &y).unwrap(),
                fstat_weights_classification(&x, &labels).unwrap(),
            ] {
                prop_assert!(w.weights.iter().all(|v| *v >= 0.0 && v.is_finite()));
                prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn scores_are_affine_invariant(
            (xs, y, p) in random_problem(),
            a in prop::sample::select(vec![-3.5, -0.2, 0.5, 7.0]),
            b in -5.0f64..5.0,
        ) {
            let n = y.len();
            let x = DMatrix::from_vec(n, p, xs);
            let mut moved = x.clone();
            moved.column_mut(0).apply(|v| *v = a * *v + b);
            let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            let pairs = [
                (squared_correlations(&x, &y).unwrap(), squared_correlations(&moved, &y).unwrap()),
                (regression_f_scores(&x, &y).unwrap(), regression_f_scores(&moved, &y).unwrap()),
                (anova_f_scores(&x, &labels).unwrap(), anova_f_scores(&moved, &labels).unwrap()),
            ];
            for (before, after) in pairs {
                let scale = before[0].abs().max(1.0);
                prop_assert!((before[0] - after[0]).abs() <= 1e-9 * scale,
                    "{} vs {}", before[0], after[0]);
            }
        }

        #[test]
        fn regression_rankings_agree((xs, y, p) in random_problem()) {
            let x = DMatrix::from_vec(y.len(), p, xs);
            let r2 = squared_correlations(&x, &y).unwrap();
            let f = regression_f_scores(&x, &y).unwrap();
            for i in 0..p {
                for j in 0..p {
                    if r2[i] < r2[j] {
                        prop_assert!(f[i] <= f[j]);
                    }
                }
            }
        }

        #[test]
        fn column_permutation_is_equivariant((xs, y, p) in random_problem(), seed in 0u64..1000) {
            let n = y.len();
            let x = DMatrix::from_vec(n, p, xs);
            let mut order: Vec<usize> = (0..p).collect();
            crate::rng::RngStream::derive(seed, &[1]).shuffle(&mut order);
            let permuted = x.select_columns(order.iter());
            let w = correlation_weights(&x, &y).unwrap().weights;
            let wp = correlation_weights(&permuted, &y).unwrap().weights;
            for (k, &j) in order.iter().enumerate() {
                prop_assert!((wp[k] - w[j]).abs() < 1e-15);
            }
        }
    }
}
