//! Loss metrics and the replicated train/test protocol used to compare
//! methods.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset, Task};
use crate::ensemble::{fit_base, train_rssl, RsslConfig, SubsetSize, DEFAULT_LEARNERS};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestConfig};
use crate::learners::FitConfig;
use crate::rng::{mix64, Purpose, RngStream};
use crate::synthetic::{generate_replication, ScenarioConfig};
use crate::weighting::{FeatureWeights, Scheme};

pub const DEFAULT_REPLICATIONS: usize = 100;
pub const DEFAULT_SPLIT: f64 = 0.7;

pub fn mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(predictions, truth)?;
    Ok(predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / truth.len() as f64)
}

/// Fraction of mismatched class ids.
pub fn mcr(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(predictions, truth)?;
    let wrong = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p != t)
        .count();
    Ok(wrong as f64 / truth.len() as f64)
}

fn check_lengths(predictions: &[f64], truth: &[f64]) -> Result<()> {
    if truth.is_empty() || predictions.len() != truth.len() {
        return Err(Error::data(format!(
            "loss needs equal non-zero lengths, got {} and {}",
            predictions.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Squared error for regression, misclassification for classification.
pub fn task_loss(task: Task, predictions: &[f64], truth: &[f64]) -> Result<f64> {
    match task {
        Task::Regression => mse(predictions, truth),
        Task::Classification => mcr(predictions, truth),
    }
}

/// Mean and sample standard deviation (divisor `R - 1`; 0 when `R = 1`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    SingleBase,
    UniformRssl,
    AdaptiveCorrelation,
    AdaptiveFStat,
    RandomForest,
}

impl MethodId {
    pub const ALL: [MethodId; 5] = [
        MethodId::SingleBase,
        MethodId::UniformRssl,
        MethodId::AdaptiveCorrelation,
        MethodId::AdaptiveFStat,
        MethodId::RandomForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MethodId::SingleBase => "single",
            MethodId::UniformRssl => "uniform",
            MethodId::AdaptiveCorrelation => "adaptive-corr",
            MethodId::AdaptiveFStat => "adaptive-fstat",
            MethodId::RandomForest => "rf",
        }
    }

    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            MethodId::AdaptiveCorrelation | MethodId::AdaptiveFStat
        )
    }

    /// The adaptive method for a weighting scheme (uniform maps to [`MethodId::UniformRssl`]).
    pub fn for_scheme(scheme: Scheme) -> MethodId {
        match scheme {
            Scheme::Uniform => MethodId::UniformRssl,
            Scheme::Correlation => MethodId::AdaptiveCorrelation,
            Scheme::FStatistic => MethodId::AdaptiveFStat,
        }
    }
}

impl std::str::FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MethodId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown method '{s}'")))
    }
}

impl std::fmt::Display for MethodId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where a replication's train and test data come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// A fixed dataset, re-split every replication.
    Dataset { name: String, data: Dataset },
    /// A simulated scenario, redrawn every replication.
    Scenario(ScenarioConfig),
}

impl DataSource {
    pub fn task(&self) -> Task {
        match self {
            DataSource::Dataset { data, .. } => data.task(),
            DataSource::Scenario(s) => s.task,
        }
    }

    pub fn describe(&self) -> serde_json::Value {
        match self {
            DataSource::Dataset { name, data } => serde_json::json!({
                "kind": "dataset",
                "name": name,
                "n": data.n(),
                "p": data.p(),
                "task": data.task(),
                "target": data.target_name(),
            }),
            DataSource::Scenario(s) => serde_json::json!({
                "kind": "scenario",
                "id": s.id(),
                "n": s.n,
                "p": s.p,
                "rho": s.rho,
                "task": s.task,
                "k_true": s.k_true,
                "noise_sd": s.noise_sd,
                "test_size": s.test_size,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub replications: usize,
    /// Train fraction for dataset sources; scenarios use their own sizes.
    pub split_fraction: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            replications: DEFAULT_REPLICATIONS,
            split_fraction: DEFAULT_SPLIT,
        }
    }
}

/// Per-replication facts handed to a method.
#[derive(Debug, Clone, Copy)]
pub struct RunContext {
    pub replication: u64,
    /// Seed private to this (replication, method) pair.
    pub seed: u64,
}

pub struct MethodOutput {
    /// Regression values or class ids (0.0 / 1.0), one per test row.
    pub predictions: Vec<f64>,
    pub weights: Option<FeatureWeights>,
}

/// Anything that can be trained on a replication's train set and scored on
/// its test set. Built-in methods only look at the test features.
pub trait Method: Sync {
    fn id(&self) -> String;

    /// Stream label distinguishing this method's randomness.
    fn stream_tag(&self) -> u64;

    fn supports(&self, _task: Task) -> bool {
        true
    }

    fn fit_predict(
        &self,
        train: &Dataset,
        test: &Dataset,
        ctx: &RunContext,
    ) -> Result<MethodOutput>;
}

/// Settings shared by the built-in methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    pub learners: usize,
    pub subset_size: SubsetSize,
    pub fit: FitConfig,
    pub forest: ForestConfig,
}

impl Default for MethodSettings {
    fn default() -> Self {
        MethodSettings {
            learners: DEFAULT_LEARNERS,
            subset_size: SubsetSize::Auto,
            fit: FitConfig::default(),
            forest: ForestConfig::default(),
        }
    }
}

pub struct BuiltinMethod {
    pub id: MethodId,
    pub settings: MethodSettings,
}

impl BuiltinMethod {
    pub fn new(id: MethodId, settings: MethodSettings) -> Self {
        BuiltinMethod { id, settings }
    }
}

impl Method for BuiltinMethod {
    fn id(&self) -> String {
        self.id.as_str().to_string()
    }

    fn stream_tag(&self) -> u64 {
        self.id as u64 + 1
    }

    fn fit_predict(
        &self,
        train: &Dataset,
        test: &Dataset,
        ctx: &RunContext,
    ) -> Result<MethodOutput> {
        let task = train.task();
        let rssl = |scheme: Scheme| -> Result<MethodOutput> {
            let config = RsslConfig {
                learners: self.settings.learners,
                subset_size: self.settings.subset_size,
                fit: self.settings.fit.clone(),
                ..RsslConfig::new(task, scheme, ctx.seed)
            };
            let model = train_rssl(train, &config)?;
            Ok(MethodOutput {
                predictions: model.predict_matrix(test.features()),
                weights: Some(model.weights_used),
            })
        };
        match self.id {
            MethodId::SingleBase => {
                let rows: Vec<usize> = (0..train.n()).collect();
                let cols: Vec<usize> = (0..train.p()).collect();
                let model = fit_base(train, &rows, &cols, &self.settings.fit)?;
                Ok(MethodOutput {
                    predictions: model.predict_matrix(test.features()),
                    weights: None,
                })
            }
            MethodId::UniformRssl => rssl(Scheme::Uniform),
            MethodId::AdaptiveCorrelation => rssl(Scheme::Correlation),
            MethodId::AdaptiveFStat => rssl(Scheme::FStatistic),
            MethodId::RandomForest => {
                let config = ForestConfig {
                    seed: ctx.seed,
                    ..self.settings.forest.clone()
                };
                let forest = fit_forest(train, &config)?;
                Ok(MethodOutput {
                    predictions: forest.predict_matrix(test.features()),
                    weights: None,
                })
            }
        }
    }
}

/// Built-in methods for the given ids with shared settings.
pub fn builtin_methods(ids: &[MethodId], settings: &MethodSettings) -> Vec<BuiltinMethod> {
    ids.iter()
        .map(|&id| BuiltinMethod::new(id, settings.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub id: String,
    pub mean: f64,
    pub std: f64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub task: Task,
    pub replications: usize,
    pub seed: u64,
    pub protocol: String,
    pub split_fraction: Option<f64>,
    pub source: serde_json::Value,
    pub methods: Vec<MethodResult>,
    /// Whether the first adaptive method beat the random forest, when both ran.
    pub better_flag: Option<bool>,
    /// Weights of the first weighted method on the first replication.
    pub weights_used: Option<Vec<f64>>,
}

impl BenchmarkReport {
    pub fn method(&self, id: &str) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.id == id)
    }
}

/// Seed for `method` on `replication`, independent of method order.
fn method_seed(seed: u64, replication: u64, tag: u64) -> u64 {
    RngStream::derive(seed, &[replication, tag, 0]).next_u64()
}

/// Average test error over `protocol.replications` replications.
///
/// Replication `r` draws either a fresh stratified split of the dataset
/// (stream `(seed; r, split)`) or a fresh train/test pair from the scenario
/// (the scenario's own seed is replaced by `seed`). Every method trains on
/// the same rows and is scored on the same test rows.
pub fn avte(
    source: &DataSource,
    methods: &[&dyn Method],
    protocol: &Protocol,
    seed: u64,
) -> Result<BenchmarkReport> {
    if protocol.replications == 0 {
        return Err(Error::config("replications must be >= 1"));
    }
    if methods.is_empty() {
        return Err(Error::config("no methods requested"));
    }
    let task = source.task();
    for m in methods {
        if !m.supports(task) {
            return Err(Error::config(format!(
                "method {} does not support {task}",
                m.id()
            )));
        }
    }

    let per_replication = (0..protocol.replications as u64)
        .into_par_iter()
        .map(|r| run_replication(source, methods, protocol, seed, r))
        .collect::<Result<Vec<_>>>()?;

    let methods_out: Vec<MethodResult> = methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let losses: Vec<f64> = per_replication.iter().map(|rep| rep.losses[k]).collect();
            let (mean, std) = mean_std(&losses);
            MethodResult {
                id: m.id(),
                mean,
                std,
                losses,
            }
        })
        .collect();

    let better_flag = {
        let adaptive = methods_out.iter().find(|m| m.id.starts_with("adaptive"));
        let forest = methods_out
            .iter()
            .find(|m| m.id == MethodId::RandomForest.as_str());
        adaptive.zip(forest).map(|(a, f)| a.mean < f.mean)
    };
    let weights_used = per_replication
        .first()
        .and_then(|rep| rep.weights.clone())
        .map(|w| w.weights);

    Ok(BenchmarkReport {
        task,
        replications: protocol.replications,
        seed,
        protocol: match source {
            DataSource::Dataset { .. } => "resplit".to_string(),
            DataSource::Scenario(_) => "regenerate".to_string(),
        },
        split_fraction: match source {
            DataSource::Dataset { .. } => Some(protocol.split_fraction),
            DataSource::Scenario(_) => None,
        },
        source: source.describe(),
        methods: methods_out,
        better_flag,
        weights_used,
    })
}

struct ReplicationResult {
    losses: Vec<f64>,
    weights: Option<FeatureWeights>,
}

fn replication_data(
    source: &DataSource,
    protocol: &Protocol,
    seed: u64,
    r: u64,
) -> Result<(Dataset, Dataset)> {
    match source {
        DataSource::Dataset { data, .. } => {
            let mut rng = RngStream::derive(seed, &[r, Purpose::Split.tag()]);
            let parts = split(data, protocol.split_fraction, &mut rng)?;
            Ok((
                data.select_rows(&parts.train_indices),
                data.select_rows(&parts.test_indices),
            ))
        }
        DataSource::Scenario(config) => {
            let config = ScenarioConfig {
                seed,
                ..config.clone()
            };
            generate_replication(&config, r)
        }
    }
}

fn run_replication(
    source: &DataSource,
    methods: &[&dyn Method],
    protocol: &Protocol,
    seed: u64,
    r: u64,
) -> Result<ReplicationResult> {
    let (train, test) = replication_data(source, protocol, seed, r)?;
    let mut losses = Vec::with_capacity(methods.len());
    let mut weights = None;
    for m in methods {
        let ctx = RunContext {
            replication: r,
            seed: method_seed(seed, r, m.stream_tag()),
        };
        let out = m.fit_predict(&train, &test, &ctx)?;
        let loss = task_loss(train.task(), &out.predictions, test.target())?;
        if !loss.is_finite() {
            return Err(Error::numeric(format!(
                "method {} produced a non-finite loss",
                m.id()
            )));
        }
        losses.push(loss);
        if weights.is_none()
            && out
                .weights
                .as_ref()
                .is_some_and(|w| w.scheme != Scheme::Uniform)
        {
            weights = out.weights;
        }
    }
    Ok(ReplicationResult { losses, weights })
}

/// One row of a correlation sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rho: f64,
    pub method: String,
    pub mean: f64,
    pub std: f64,
}

/// Runs [`avte`] once per correlation level on `base` with `rho` replaced.
pub fn rho_sweep(
    base: &ScenarioConfig,
    rhos: &[f64],
    methods: &[&dyn Method],
    protocol: &Protocol,
    seed: u64,
) -> Result<Vec<(f64, BenchmarkReport)>> {
    if rhos.is_empty() {
        return Err(Error::config("rho sweep needs at least one rho"));
    }
    rhos.iter()
        .map(|&rho| {
            let scenario = ScenarioConfig {
                rho,
                ..base.clone()
            };
            // decorrelate levels while keeping each level reproducible on its own
            let level_seed = mix64(seed ^ rho.to_bits());
            avte(
                &DataSource::Scenario(scenario),
                methods,
                protocol,
                level_seed,
            )
            .map(|r| (rho, r))
        })
        .collect()
}

/// Long-format rows `(rho, method, mean, std)` of a sweep.
pub fn sweep_rows(sweep: &[(f64, BenchmarkReport)]) -> Vec<SweepRow> {
    sweep
        .iter()
        .flat_map(|(rho, report)| {
            report.methods.iter().map(move |m| SweepRow {
                rho: *rho,
                method: m.id.clone(),
                mean: m.mean,
                std: m.std,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("rho,method,mean,std\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.rho, row.method, row.mean, row.std
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 4.0]).unwrap(), 2.0);
        assert_eq!(mse(&[11.0, 12.0], &[11.0, 14.0]).unwrap(), 2.0);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mcr_examples() {
        assert_eq!(mcr(&[0.0, 1.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(mcr(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(
            mcr(&[1.0, 0.0, 1.0, 1.0], &[1.0, 0.0, 1.0, 0.0]).unwrap(),
            0.25
        );
    }

    #[test]
    fn sample_std() {
        let (mean, std) = mean_std(&[2.0, 4.0]);
        assert_eq!(mean, 3.0);
        assert_eq!(std, 2f64.sqrt());
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }

    #[test]
    fn method_names_round_trip() {
        for id in MethodId::ALL {
            assert_eq!(id.as_str().parse::<MethodId>().unwrap(), id);
        }
        assert!("boosting".parse::<MethodId>().is_err());
        assert_eq!(
            MethodId::for_scheme(Scheme::FStatistic),
            MethodId::AdaptiveFStat
        );
    }
}
