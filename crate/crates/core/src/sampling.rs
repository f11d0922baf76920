//! Bootstrap row draws and weighted feature-subset draws.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::weighting::FeatureWeights;

/// Row indices of one bootstrap replicate (length n, repetition allowed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleDraw {
    pub indices: Vec<usize>,
}

impl SampleDraw {
    /// Membership flags: `true` for rows drawn at least once.
    pub fn indicator(&self, n: usize) -> Vec<bool> {
        let mut flags = vec![false; n];
        for &i in &self.indices {
            flags[i] = true;
        }
        flags
    }

    pub fn distinct(&self) -> usize {
        let n = self.indices.iter().max().map_or(0, |m| m + 1);
        self.indicator(n).into_iter().filter(|&b| b).count()
    }
}

/// Distinct feature indices, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetDraw {
    pub indices: Vec<usize>,
}

impl SubsetDraw {
    /// Checks the invariants: non-empty, strictly ascending, below `p`.
    pub fn new(indices: Vec<usize>, p: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::data("feature subset is empty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::data("feature subset must be strictly ascending"));
        }
        if indices.last().is_some_and(|&j| j >= p) {
            return Err(Error::data(format!("feature subset exceeds p = {p}")));
        }
        Ok(SubsetDraw { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

pub fn bootstrap(n: usize, rng: &mut RngStream) -> Result<SampleDraw> {
    if n == 0 {
        return Err(Error::data("bootstrap of an empty sample"));
    }
    Ok(SampleDraw {
        indices: (0..n).map(|_| rng.next_index(n)).collect(),
    })
}

/// `k` distinct indices from `0..p`, uniformly, sorted ascending.
pub fn sample_without_replacement(p: usize, k: usize, rng: &mut RngStream) -> Vec<usize> {
    assert!(k <= p, "cannot draw {k} of {p}");
    let mut pool: Vec<usize> = (0..p).collect();
    for i in 0..k {
        let j = i + rng.next_index(p - i);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

/// Sequential weighted sampling without replacement.
///
/// Each of the `d` rounds picks one remaining index with probability
/// proportional to its weight, then removes it. Once the positive-weight
/// indices are exhausted the rest are filled uniformly from the zero-weight
/// ones.
pub fn draw_subset(weights: &FeatureWeights, d: usize, rng: &mut RngStream) -> Result<SubsetDraw> {
    let p = weights.len();
    if d == 0 {
        return Err(Error::config("subset size must be at least 1"));
    }
    if d > p {
        return Err(Error::config(format!(
            "subset size {d} exceeds {p} features"
        )));
    }

    let mut positive: Vec<(usize, f64)> = weights
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > 0.0)
        .map(|(j, &w)| (j, w))
        .collect();
    let mut chosen = Vec::with_capacity(d);

    while chosen.len() < d && !positive.is_empty() {
        let total: f64 = positive.iter().map(|(_, w)| w).sum();
        let target = rng.next_uniform() * total;
        let mut acc = 0.0;
        // rounding can leave `target` past the final partial sum
        let mut pick = positive.len() - 1;
        for (k, (_, w)) in positive.iter().enumerate() {
            acc += w;
            if target < acc {
                pick = k;
                break;
            }
        }
        chosen.push(positive.remove(pick).0);
    }

    if chosen.len() < d {
        let mut zero: Vec<usize> = weights
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w <= 0.0)
            .map(|(j, _)| j)
            .collect();
        let need = d - chosen.len();
        for i in 0..need {
            let j = i + rng.next_index(zero.len() - i);
            zero.swap(i, j);
        }
        chosen.extend_from_slice(&zero[..need]);
    }

    chosen.sort_unstable();
    Ok(SubsetDraw { indices: chosen })
}
