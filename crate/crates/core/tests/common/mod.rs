#![allow(dead_code)]

use nalgebra::DMatrix;
use rssl::{Dataset, RngStream, Task};

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut RngStream) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.next_gaussian())
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Least squares with intercept via the normal equations on `[1 | X]`.
/// Returns `(intercept, slopes)`.
#[allow(clippy::needless_range_loop)]
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let (m, d) = x.shape();
    let col = |j: usize, i: usize| if j == 0 { 1.0 } else { x[(i, j - 1)] };
    let mut a = vec![vec![0.0; d + 1]; d + 1];
    let mut b = vec![0.0; d + 1];
    for j in 0..=d {
        for k in 0..=d {
            a[j][k] = (0..m).map(|i| col(j, i) * col(k, i)).sum();
        }
        b[j] = (0..m).map(|i| col(j, i) * y[i]).sum();
    }
    let theta = solve(a, b);
    (theta[0], theta[1..].to_vec())
}

/// Penalized Bernoulli log-likelihood written out term by term.
pub fn logistic_objective(
    x: &DMatrix<f64>,
    y: &[f64],
    intercept: f64,
    slopes: &[f64],
    ridge: f64,
) -> f64 {
    let mut total = 0.0;
    for i in 0..x.nrows() {
        let eta = intercept + (0..x.ncols()).map(|j| x[(i, j)] * slopes[j]).sum::<f64>();
        let p = 1.0 / (1.0 + (-eta).exp());
        total += if y[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
    }
    total - 0.5 * ridge * slopes.iter().map(|b| b * b).sum::<f64>()
}

/// Linear regression data `y = 1 + x . beta + noise`.
pub fn linear_dataset(n: usize, p: usize, beta: &[f64], noise: f64, seed: u64) -> Dataset {
    let mut rng = RngStream::derive(seed, &[99]);
    let x = gaussian_matrix(n, p, &mut rng);
    let y: Vec<f64> = (0..n)
        .map(|i| {
            1.0 + (0..p).map(|j| x[(i, j)] * beta[j]).sum::<f64>() + noise * rng.next_gaussian()
        })
        .collect();
    Dataset::from_matrix(x, y, Task::Regression).unwrap()
}

/// Labels drawn from a logistic model on the first feature.
pub fn logistic_dataset(n: usize, p: usize, seed: u64) -> Dataset {
    let mut rng = RngStream::derive(seed, &[98]);
    let x = gaussian_matrix(n, p, &mut rng);
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let prob = 1.0 / (1.0 + (-2.0 * x[(i, 0)]).exp());
            if rng.next_uniform() < prob {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    y[0] = 0.0;
    y[1] = 1.0;
    Dataset::from_matrix(x, y, Task::Classification).unwrap()
}
