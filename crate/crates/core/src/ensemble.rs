//! Random subspace ensembles: per-member bootstrap rows, weighted feature
//! subsets, and equal-weight aggregation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::learners::{fit_logistic, fit_ols, FitConfig, LinearModel, LogisticModel};
use crate::rng::{Purpose, RngStream};
use crate::sampling::{bootstrap, draw_subset, SubsetDraw};
use crate::weighting::{compute_weights, FeatureWeights, Scheme};

/// Attempts at drawing a bootstrap replicate with both classes present.
pub const MAX_BOOTSTRAP_ATTEMPTS: u64 = 20;

pub const DEFAULT_LEARNERS: usize = 450;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubsetSize {
    Auto,
    Fixed(usize),
}

impl SubsetSize {
    pub fn resolve(self, n: usize, p: usize) -> usize {
        match self {
            SubsetSize::Auto => auto_subset_size(n, p),
            SubsetSize::Fixed(d) => d,
        }
    }
}

impl std::str::FromStr for SubsetSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(SubsetSize::Auto);
        }
        match s.parse::<usize>() {
            Ok(d) if d >= 1 => Ok(SubsetSize::Fixed(d)),
            _ => Err(Error::config(format!(
                "subset size must be 'auto' or >= 1, got '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for SubsetSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubsetSize::Auto => f.write_str("auto"),
            SubsetSize::Fixed(d) => write!(f, "{d}"),
        }
    }
}

/// Default subset size: `min(ceil(2p / 3), floor(n / 3))`, clamped to `[1, p]`.
///
/// A bootstrap replicate holds about `0.63 n` distinct rows, so least squares
/// on more than roughly `n / 3` features per member sits near the
/// interpolation threshold, where member variance explodes.
pub fn auto_subset_size(n: usize, p: usize) -> usize {
    (2 * p).div_ceil(3).min(n / 3).clamp(1, p)
}

/// How member training rows are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Resample {
    #[default]
    Bootstrap,
    /// Every member sees the full training set once (test hook).
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsslConfig {
    pub learners: usize,
    pub subset_size: SubsetSize,
    pub weighting: Scheme,
    pub task: Task,
    pub fit: FitConfig,
    pub seed: u64,
    pub resample: Resample,
}

impl RsslConfig {
    pub fn new(task: Task, weighting: Scheme, seed: u64) -> Self {
        RsslConfig {
            learners: DEFAULT_LEARNERS,
            subset_size: SubsetSize::Auto,
            weighting,
            task,
            fit: FitConfig::default(),
            seed,
            resample: Resample::Bootstrap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learners == 0 {
            return Err(Error::config("number of learners must be >= 1"));
        }
        if self.subset_size == SubsetSize::Fixed(0) {
            return Err(Error::config("subset size must be >= 1"));
        }
        self.fit.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BaseModel {
    Linear(LinearModel),
    Logistic(LogisticModel),
}

impl BaseModel {
    pub fn feature_indices(&self) -> &[usize] {
        match self {
            BaseModel::Linear(m) => &m.feature_indices,
            BaseModel::Logistic(m) => &m.feature_indices,
        }
    }

    pub fn intercept(&self) -> f64 {
        match self {
            BaseModel::Linear(m) => m.intercept,
            BaseModel::Logistic(m) => m.intercept,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        match self {
            BaseModel::Linear(m) => &m.coefficients,
            BaseModel::Logistic(m) => &m.coefficients,
        }
    }

    /// Regression values, or class-1 probabilities for logistic members.
    fn scores(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match self {
            BaseModel::Linear(m) => m.predict_matrix(x),
            BaseModel::Logistic(m) => m.predict_proba_matrix(x),
        }
    }

    /// Regression values, or class ids (0.0 / 1.0) for logistic models.
    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Vec<f64> {
        match self {
            BaseModel::Linear(m) => m.predict_matrix(x),
            BaseModel::Logistic(m) => m
                .predict_proba_matrix(x)
                .into_iter()
                .map(|p| if p >= 0.5 { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub subset: SubsetDraw,
    pub model: BaseModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<Member>,
    pub task: Task,
    pub weights_used: FeatureWeights,
    pub subset_size: usize,
    pub seed: u64,
}

/// Copies `rows` x `cols` of `x` into a dense matrix.
pub fn submatrix(x: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| x[(rows[i], cols[j])])
}

/// Fits the task's base learner on `rows` x `subset` of `data`.
pub fn fit_base(
    data: &Dataset,
    rows: &[usize],
    subset: &[usize],
    fit: &FitConfig,
) -> Result<BaseModel> {
    let x = submatrix(data.features(), rows, subset);
    let y: Vec<f64> = rows.iter().map(|&i| data.target()[i]).collect();
    Ok(match data.task() {
        Task::Regression => BaseModel::Linear(fit_ols(&x, &y, fit)?.on_features(subset.to_vec())?),
        Task::Classification => {
            BaseModel::Logistic(fit_logistic(&x, &y, fit)?.on_features(subset.to_vec())?)
        }
    })
}

/// Trains an RSSL ensemble.
///
/// Feature weights are computed once on the whole training set. Member `l`
/// then draws its feature subset from stream `(seed; l, subset)` and its
/// bootstrap rows from `(seed; l, bootstrap, attempt)`; classification
/// replicates holding a single class are redrawn, up to 20 attempts. Members
/// are fit in parallel with results identical to sequential execution.
pub fn train_rssl(train: &Dataset, config: &RsslConfig) -> Result<EnsembleModel> {
    config.validate()?;
    if train.task() != config.task {
        return Err(Error::config(format!(
            "config task {} does not match dataset task {}",
            config.task,
            train.task()
        )));
    }
    let (n, p) = (train.n(), train.p());
    let d = config.subset_size.resolve(n, p);
    if d > p {
        return Err(Error::config(format!(
            "subset size {d} exceeds {p} features"
        )));
    }
    let weights = compute_weights(
        config.weighting,
        config.task,
        train.features(),
        train.target(),
    )?;

    let members = (0..config.learners)
        .into_par_iter()
        .map(|l| train_member(train, config, &weights, d, l as u64))
        .collect::<Result<Vec<_>>>()?;

    Ok(EnsembleModel {
        members,
        task: config.task,
        weights_used: weights,
        subset_size: d,
        seed: config.seed,
    })
}

fn train_member(
    train: &Dataset,
    config: &RsslConfig,
    weights: &FeatureWeights,
    d: usize,
    learner: u64,
) -> Result<Member> {
    let n = train.n();
    let mut subset_rng = RngStream::derive(config.seed, &[learner, Purpose::Subset.tag()]);
    let subset = draw_subset(weights, d, &mut subset_rng)?;

    for attempt in 0..MAX_BOOTSTRAP_ATTEMPTS {
        let rows = match config.resample {
            Resample::Identity => (0..n).collect(),
            Resample::Bootstrap => {
                let mut rng =
                    RngStream::derive(config.seed, &[learner, Purpose::Bootstrap.tag(), attempt]);
                bootstrap(n, &mut rng)?.indices
            }
        };
        if config.task == Task::Classification {
            let first = train.target()[rows[0]];
            if rows.iter().all(|&i| train.target()[i] == first) {
                continue;
            }
        }
        let model = fit_base(train, &rows, &subset.indices, &config.fit)?;
        return Ok(Member { subset, model });
    }
    Err(Error::numeric(format!(
        "learner {learner}: no bootstrap replicate with both classes in {MAX_BOOTSTRAP_ATTEMPTS} attempts"
    )))
}

impl EnsembleModel {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn require(&self, task: Task) -> Result<()> {
        if self.task != task {
            return Err(Error::config(format!(
                "{task} prediction requested from a {} ensemble",
                self.task
            )));
        }
        Ok(())
    }

    /// Mean of member predictions.
    pub fn predict_regression(&self, x: &[f64]) -> Result<f64> {
        self.require(Task::Regression)?;
        let total: f64 = self
            .members
            .iter()
            .map(|m| match &m.model {
                BaseModel::Linear(model) => model.predict(x),
                BaseModel::Logistic(model) => model.predict_proba(x),
            })
            .sum();
        Ok(total / self.len() as f64)
    }

    /// Mean of member class-1 probabilities.
    pub fn predict_proba_ensemble(&self, x: &[f64]) -> Result<f64> {
        self.require(Task::Classification)?;
        Ok(self.member_probabilities(x).sum::<f64>() / self.len() as f64)
    }

    /// Majority vote. An exact tie goes to class 1 only if the mean member
    /// probability exceeds 0.5.
    pub fn predict_class(&self, x: &[f64]) -> Result<u8> {
        self.require(Task::Classification)?;
        let probs: Vec<f64> = self.member_probabilities(x).collect();
        Ok(vote(&probs))
    }

    fn member_probabilities<'a>(&'a self, x: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.members.iter().map(move |m| match &m.model {
            BaseModel::Logistic(model) => model.predict_proba(x),
            BaseModel::Linear(model) => model.predict(x),
        })
    }

    /// Task-dependent predictions for every row: means for regression, class
    /// ids (as 0.0 / 1.0) for classification.
    pub fn predict_matrix(&self, x: &DMatrix<f64>) -> Vec<f64> {
        let rows = x.nrows();
        let per_member: Vec<Vec<f64>> = self.members.iter().map(|m| m.model.scores(x)).collect();
        (0..rows)
            .map(|i| {
                let column: Vec<f64> = per_member.iter().map(|v| v[i]).collect();
                match self.task {
                    Task::Regression => column.iter().sum::<f64>() / column.len() as f64,
                    Task::Classification => f64::from(vote(&column)),
                }
            })
            .collect()
    }

    /// Fraction of members whose subset contains each feature.
    pub fn selection_frequencies(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.weights_used.len()];
        for m in &self.members {
            for &j in &m.subset.indices {
                counts[j] += 1;
            }
        }
        counts
            .iter()
            .map(|&c| c as f64 / self.len() as f64)
            .collect()
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            task: self.task,
            learners: self.len(),
            subset_size: self.subset_size,
            weighting: self.weights_used.scheme,
            seed: self.seed,
            members: self
                .members
                .iter()
                .map(|m| MemberDocument {
                    subset: m.subset.indices.clone(),
                    intercept: m.model.intercept(),
                    coefficients: m.model.coefficients().to_vec(),
                    converged: match &m.model {
                        BaseModel::Logistic(l) => Some(l.converged),
                        BaseModel::Linear(_) => None,
                    },
                    iterations: match &m.model {
                        BaseModel::Logistic(l) => Some(l.iterations),
                        BaseModel::Linear(_) => None,
                    },
                })
                .collect(),
            weights_used: self.weights_used.weights.clone(),
        };
        let value = serde_json::to_value(&doc).expect("model document serializes");
        serde_json::to_string(&value).expect("json value serializes")
    }

    /// Parses and validates a document written by [`EnsembleModel::to_json`].
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        let p = doc.weights_used.len();
        let weights = FeatureWeights {
            weights: doc.weights_used,
            scheme: doc.weighting,
        };
        if p == 0 || weights.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::data(
                "weights_used must be a non-empty vector of finite, non-negative values",
            ));
        }
        if (weights.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::data("weights_used must sum to 1"));
        }
        if doc.learners == 0 || doc.members.len() != doc.learners {
            return Err(Error::data(format!(
                "L = {} but {} members stored",
                doc.learners,
                doc.members.len()
            )));
        }
        let members = doc
            .members
            .into_iter()
            .map(|m| {
                if m.subset.len() != doc.subset_size {
                    return Err(Error::data("member subset size differs from d"));
                }
                let subset = SubsetDraw::new(m.subset, p)?;
                if m.coefficients.len() != subset.len() {
                    return Err(Error::data("coefficient count differs from subset size"));
                }
                if !m.intercept.is_finite() || m.coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(Error::data("non-finite model parameter"));
                }
                let model = match doc.task {
                    Task::Regression => BaseModel::Linear(LinearModel {
                        intercept: m.intercept,
                        coefficients: m.coefficients,
                        feature_indices: subset.indices.clone(),
                    }),
                    Task::Classification => BaseModel::Logistic(LogisticModel {
                        intercept: m.intercept,
                        coefficients: m.coefficients,
                        feature_indices: subset.indices.clone(),
                        converged: m.converged.unwrap_or(true),
                        iterations: m.iterations.unwrap_or(0),
                    }),
                };
                Ok(Member { subset, model })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EnsembleModel {
            members,
            task: doc.task,
            weights_used: weights,
            subset_size: doc.subset_size,
            seed: doc.seed,
        })
    }
}

fn vote(probs: &[f64]) -> u8 {
    let ones = probs.iter().filter(|&&p| p >= 0.5).count();
    let zeros = probs.len() - ones;
    match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => {
            let mean = probs.iter().sum::<f64>() / probs.len() as f64;
            u8::from(mean > 0.5)
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    task: Task,
    #[serde(rename = "L")]
    learners: usize,
    #[serde(rename = "d")]
    subset_size: usize,
    weighting: Scheme,
    seed: u64,
    members: Vec<MemberDocument>,
    weights_used: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemberDocument {
    subset: Vec<usize>,
    intercept: f64,
    coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weighting::uniform_weights;

    fn linear_member(intercept: f64) -> Member {
        Member {
            subset: SubsetDraw { indices: vec![0] },
            model: BaseModel::Linear(LinearModel {
                intercept,
                coefficients: vec![0.0],
                feature_indices: vec![0],
            }),
        }
    }

    /// A logistic member whose probability at x = [0] is `prob`.
    fn logistic_member(prob: f64) -> Member {
        Member {
            subset: SubsetDraw { indices: vec![0] },
            model: BaseModel::Logistic(LogisticModel {
                intercept: (prob / (1.0 - prob)).ln(),
                coefficients: vec![1.0],
                feature_indices: vec![0],
                converged: true,
                iterations: 1,
            }),
        }
    }

    fn ensemble(members: Vec<Member>, task: Task) -> EnsembleModel {
        EnsembleModel {
            members,
            task,
            weights_used: uniform_weights(1).unwrap(),
            subset_size: 1,
            seed: 0,
        }
    }

    #[test]
    fn regression_mean() {
        let e = ensemble(vec![linear_member(3.0); 4], Task::Regression);
        assert_eq!(e.predict_regression(&[1.0]).unwrap(), 3.0);
        let e = ensemble(
            vec![linear_member(1.0), linear_member(3.0)],
            Task::Regression,
        );
        assert_eq!(e.predict_regression(&[1.0]).unwrap(), 2.0);
        assert!(e.predict_class(&[1.0]).is_err());
    }

    #[test]
    fn majority_vote() {
        let e = ensemble(
            vec![
                logistic_member(0.9),
                logistic_member(0.8),
                logistic_member(0.1),
            ],
            Task::Classification,
        );
        assert_eq!(e.predict_class(&[0.0]).unwrap(), 1);
        assert!(e.predict_regression(&[0.0]).is_err());
    }

    #[test]
    fn tie_breaks_on_mean_probability() {
        // votes (0, 1), mean probability 0.60
        let e = ensemble(
            vec![logistic_member(0.3), logistic_member(0.9)],
            Task::Classification,
        );
        assert!((e.predict_proba_ensemble(&[0.0]).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(e.predict_class(&[0.0]).unwrap(), 1);
        let e = ensemble(
            vec![logistic_member(0.1), logistic_member(0.6)],
            Task::Classification,
        );
        assert_eq!(e.predict_class(&[0.0]).unwrap(), 0);
        assert_eq!(vote(&[0.25, 0.75]), 0);
    }

    #[test]
    fn single_member_reduces() {
        for prob in [0.2, 0.7] {
            let e = ensemble(vec![logistic_member(prob)], Task::Classification);
            assert!((e.predict_proba_ensemble(&[0.0]).unwrap() - prob).abs() < 1e-12);
            assert_eq!(e.predict_class(&[0.0]).unwrap(), u8::from(prob >= 0.5));
        }
        let e = ensemble(vec![logistic_member(0.5); 3], Task::Classification);
        assert!((e.predict_proba_ensemble(&[0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn proba_is_hand_mean() {
        let e = ensemble(
            vec![
                logistic_member(0.2),
                logistic_member(0.5),
                logistic_member(0.95),
            ],
            Task::Classification,
        );
        let by_hand = (0.2 + 0.5 + 0.95) / 3.0;
        assert!((e.predict_proba_ensemble(&[0.0]).unwrap() - by_hand).abs() < 1e-12);
    }

    #[test]
    fn auto_subset_size_rule() {
        assert_eq!(auto_subset_size(200, 25), 17);
        assert_eq!(auto_subset_size(25, 200), 8);
        assert_eq!(auto_subset_size(50, 1000), 16);
        assert_eq!(auto_subset_size(1000, 50), 34);
        assert_eq!(auto_subset_size(2, 100), 1);
        assert_eq!(auto_subset_size(100, 1), 1);
        assert_eq!("auto".parse::<SubsetSize>().unwrap(), SubsetSize::Auto);
        assert_eq!("7".parse::<SubsetSize>().unwrap(), SubsetSize::Fixed(7));
        assert!("0".parse::<SubsetSize>().is_err());
    }

    #[test]
    fn model_json_rejects_inconsistent_documents() {
        let bad = [
            "{}",
            r#"{"task":"regression","L":1,"d":1,"weighting":"uniform","seed":0,"members":[],"weights_used":[1.0]}"#,
            r#"{"task":"regression","L":1,"d":1,"weighting":"uniform","seed":0,"members":[{"subset":[3],"intercept":0,"coefficients":[1]}],"weights_used":[1.0]}"#,
            r#"{"task":"regression","L":1,"d":1,"weighting":"uniform","seed":0,"members":[{"subset":[0],"intercept":0,"coefficients":[1,2]}],"weights_used":[1.0]}"#,
            r#"{"task":"regression","L":1,"d":1,"weighting":"uniform","seed":0,"members":[{"subset":[0],"intercept":0,"coefficients":[1]}],"weights_used":[0.5]}"#,
        ];
        for doc in bad {
            assert!(EnsembleModel::from_json(doc).is_err(), "{doc}");
        }
        let good = r#"{"task":"regression","L":1,"d":1,"weighting":"uniform","seed":0,"members":[{"subset":[0],"intercept":0.5,"coefficients":[1]}],"weights_used":[1.0]}"#;
        let model = EnsembleModel::from_json(good).unwrap();
        assert_eq!(model.predict_regression(&[2.0]).unwrap(), 2.5);
    }
}
