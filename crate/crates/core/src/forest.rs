//! CART trees and a bagged random forest, used as the comparison baseline.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::rng::{Purpose, RngStream};
use crate::sampling::{bootstrap, sample_without_replacement};

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_with(|j| x[j])
    }

    fn predict_with(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x(*feature) <= *threshold {
                        left
                    } else {
                        right
                    }
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaves() + right.leaves(),
        }
    }
}

/// Forest settings; `None` fields resolve per task at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    /// Default `ceil(sqrt(p))` for classification, `ceil(p / 3)` for regression.
    pub mtry: Option<usize>,
    /// Default 5 for regression, 1 for classification.
    pub min_leaf: Option<usize>,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 450,
            mtry: None,
            min_leaf: None,
            max_depth: 30,
            seed: 0,
        }
    }
}

/// Concrete tree-growing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub task: Task,
    pub mtry: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl ForestConfig {
    pub fn resolve(&self, task: Task, p: usize) -> Result<TreeParams> {
        if self.trees == 0 || self.max_depth == 0 {
            return Err(Error::config("forest trees and max_depth must be >= 1"));
        }
        let mtry = self.mtry.unwrap_or(match task {
            Task::Classification => (p as f64).sqrt().ceil() as usize,
            Task::Regression => p.div_ceil(3),
        });
        let min_leaf = self.min_leaf.unwrap_or(match task {
            Task::Regression => 5,
            Task::Classification => 1,
        });
        if mtry == 0 || min_leaf == 0 {
            return Err(Error::config("forest mtry and min_leaf must be >= 1"));
        }
        Ok(TreeParams {
            task,
            mtry: mtry.min(p),
            min_leaf,
            max_depth: self.max_depth,
        })
    }
}

/// Grows one CART tree on `rows` of `x` (repetition allowed).
///
/// Each node samples `mtry` features without replacement and takes the
/// midpoint threshold minimizing the size-weighted child impurity (variance
/// for regression, Gini for classification). Growth stops at pure nodes, at
/// `max_depth`, when no split leaves `min_leaf` rows on both sides, or when
/// no candidate strictly lowers the impurity.
pub fn grow_tree(
    x: &DMatrix<f64>,
    y: &[f64],
    rows: &[usize],
    params: &TreeParams,
    rng: &mut RngStream,
) -> Result<TreeNode> {
    if rows.is_empty() {
        return Err(Error::data("cannot grow a tree on zero rows"));
    }
    let mut rows = rows.to_vec();
    Ok(grow(x, y, &mut rows, params, rng, 0))
}

/// Grows a tree on every row of `x`.
pub fn fit_tree(
    x: &DMatrix<f64>,
    y: &[f64],
    params: &TreeParams,
    rng: &mut RngStream,
) -> Result<TreeNode> {
    if x.nrows() != y.len() {
        return Err(Error::data("row count mismatch"));
    }
    let rows: Vec<usize> = (0..x.nrows()).collect();
    grow_tree(x, y, &rows, params, rng)
}

fn leaf_value(y: &[f64], rows: &[usize], task: Task) -> f64 {
    match task {
        Task::Regression => rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64,
        Task::Classification => {
            let ones = rows.iter().filter(|&&i| y[i] == 1.0).count();
            // ties go to the lower class id
            if 2 * ones > rows.len() {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Impurity of a node from its count, sum and sum of squares of the response.
/// For 0/1 labels the Gini index is `2 q (1 - q)` with `q = sum / count`.
fn impurity(task: Task, count: f64, sum: f64, sum_sq: f64) -> f64 {
    let mean = sum / count;
    match task {
        Task::Regression => (sum_sq / count - mean * mean).max(0.0),
        Task::Classification => 2.0 * mean * (1.0 - mean),
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn grow(
    x: &DMatrix<f64>,
    y: &[f64],
    rows: &mut [usize],
    params: &TreeParams,
    rng: &mut RngStream,
    depth: usize,
) -> TreeNode {
    let leaf = |rows: &[usize]| TreeNode::Leaf {
        value: leaf_value(y, rows, params.task),
    };
    let n = rows.len();
    let first = y[rows[0]];
    if rows.iter().all(|&i| y[i] == first) || depth >= params.max_depth || n < 2 * params.min_leaf {
        return leaf(rows);
    }

    let (sum, sum_sq) = rows
        .iter()
        .fold((0.0, 0.0), |(s, q), &i| (s + y[i], q + y[i] * y[i]));
    let parent = impurity(params.task, n as f64, sum, sum_sq);

    let features = sample_without_replacement(x.ncols(), params.mtry, rng);
    let mut best: Option<Candidate> = None;
    let mut order: Vec<usize> = rows.to_vec();
    for &feature in &features {
        order.sort_by(|&a, &b| x[(a, feature)].total_cmp(&x[(b, feature)]));
        let (mut left_sum, mut left_sq) = (0.0, 0.0);
        for k in 0..n - 1 {
            let yi = y[order[k]];
            left_sum += yi;
            left_sq += yi * yi;
            let left_n = k + 1;
            let here = x[(order[k], feature)];
            let next = x[(order[k + 1], feature)];
            if here == next || left_n < params.min_leaf || n - left_n < params.min_leaf {
                continue;
            }
            let right_n = (n - left_n) as f64;
            let score = (left_n as f64 * impurity(params.task, left_n as f64, left_sum, left_sq)
                + right_n * impurity(params.task, right_n, sum - left_sum, sum_sq - left_sq))
                / n as f64;
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(Candidate {
                    feature,
                    threshold: 0.5 * (here + next),
                    score,
                });
            }
        }
    }

    let Some(split) = best.filter(|b| b.score < parent * (1.0 - 1e-12)) else {
        return leaf(rows);
    };
    // the midpoint of adjacent floats may round onto either endpoint
    let threshold = split.threshold;
    let mid = partition_rows(rows, |i| x[(i, split.feature)] <= threshold);
    if mid == 0 || mid == n {
        return leaf(rows);
    }
    let (left_rows, right_rows) = rows.split_at_mut(mid);
    let left = grow(x, y, left_rows, params, rng, depth + 1);
    let right = grow(x, y, right_rows, params, rng, depth + 1);
    TreeNode::Split {
        feature: split.feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Moves rows satisfying `pred` to the front; returns how many there are.
fn partition_rows(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut mid = 0;
    for k in 0..rows.len() {
        if pred(rows[k]) {
            rows.swap(mid, k);
            mid += 1;
        }
    }
    mid
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub task: Task,
}

/// Fits `config.trees` trees, tree `t` on a bootstrap drawn from
/// `(seed; t, bootstrap)` and grown with `(seed; t, tree)`.
pub fn fit_forest(train: &Dataset, config: &ForestConfig) -> Result<ForestModel> {
    let params = config.resolve(train.task(), train.p())?;
    let n = train.n();
    let trees = (0..config.trees as u64)
        .into_par_iter()
        .map(|t| {
            let rows = bootstrap(
                n,
                &mut RngStream::derive(config.seed, &[t, Purpose::Bootstrap.tag()]),
            )?;
            let mut rng = RngStream::derive(config.seed, &[t, Purpose::Tree.tag()]);
            grow_tree(
                train.features(),
                train.target(),
                &rows.indices,
                &params,
                &mut rng,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel {
        trees,
        task: train.task(),
    })
}

impl ForestModel {
    /// Mean of tree outputs (regression) or majority vote, ties to class 0.
    pub fn predict(&self, x: &[f64]) -> f64 {
        aggregate(self.task, self.trees.iter().map(|t| t.predict(x)))
    }

    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (0..x.nrows())
            .map(|i| {
                aggregate(
                    self.task,
                    self.trees.iter().map(|t| t.predict_with(|j| x[(i, j)])),
                )
            })
            .collect()
    }
}

fn aggregate(task: Task, outputs: impl Iterator<Item = f64>) -> f64 {
    let (count, total) = outputs.fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    match task {
        Task::Regression => total / count as f64,
        Task::Classification => {
            if 2.0 * total > count as f64 {
                1.0
            } else {
                0.0
            }
        }
    }
}
