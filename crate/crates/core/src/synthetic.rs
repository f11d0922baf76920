//! Simulated regression and classification scenarios over equicorrelated
//! Gaussian features.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::learners::sigmoid;
use crate::rng::{Purpose, RngStream};

/// Redraws allowed when a classification sample comes out single-class.
pub const MAX_GENERATE_ATTEMPTS: u64 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub task: Task,
    pub seed: u64,
    /// Leading features with coefficient 1; the rest are 0.
    pub k_true: usize,
    pub noise_sd: f64,
    pub test_size: usize,
}

impl ScenarioConfig {
    /// Scenario with `k_true = min(10, p)`, unit noise and 1000 test rows.
    pub fn new(n: usize, p: usize, rho: f64, task: Task) -> Self {
        ScenarioConfig {
            n,
            p,
            rho,
            task,
            seed: 0,
            k_true: p.min(10),
            noise_sd: 1.0,
            test_size: 1000,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.test_size == 0 {
            return Err(Error::config("scenario n, p and test_size must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::config(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        if self.k_true == 0 || self.k_true > self.p {
            return Err(Error::config(format!(
                "k_true must lie in [1, p = {}], got {}",
                self.p, self.k_true
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::config("noise_sd must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn true_coefficients(&self) -> Vec<f64> {
        (0..self.p)
            .map(|j| if j < self.k_true { 1.0 } else { 0.0 })
            .collect()
    }

    /// Short identifier such as `regression_n25_p200_rho0.5`.
    pub fn id(&self) -> String {
        format!("{}_n{}_p{}_rho{}", self.task, self.n, self.p, self.rho)
    }
}

/// Rows of an equicorrelated standard normal: `sqrt(rho) z0 + sqrt(1 - rho) z_j`.
pub fn equicorrelated_rows(rows: usize, p: usize, rho: f64, rng: &mut RngStream) -> DMatrix<f64> {
    let shared = rho.sqrt();
    let own = (1.0 - rho).sqrt();
    let mut values = Vec::with_capacity(rows * p);
    for _ in 0..rows {
        let common = rng.next_gaussian();
        for _ in 0..p {
            values.push(shared * common + own * rng.next_gaussian());
        }
    }
    DMatrix::from_row_slice(rows, p, &values)
}

fn draw_side(config: &ScenarioConfig, rows: usize, replication: u64, side: u64) -> Result<Dataset> {
    let beta = config.true_coefficients();
    for attempt in 0..MAX_GENERATE_ATTEMPTS {
        let mut rng = RngStream::derive(
            config.seed,
            &[replication, side, Purpose::Generate.tag(), attempt],
        );
        let x = equicorrelated_rows(rows, config.p, config.rho, &mut rng);
        let signal: Vec<f64> = (0..rows)
            .map(|i| (0..config.k_true).map(|j| beta[j] * x[(i, j)]).sum())
            .collect();
        let y: Vec<f64> = match config.task {
            Task::Regression => signal
                .iter()
                .map(|s| s + config.noise_sd * rng.next_gaussian())
                .collect(),
            Task::Classification => signal
                .iter()
                .map(|&s| f64::from(rng.next_uniform() < sigmoid(s)))
                .collect(),
        };
        if config.task == Task::Classification && rows >= 2 && y.iter().all(|&v| v == y[0]) {
            continue;
        }
        return Dataset::from_matrix(x, y, config.task);
    }
    Err(Error::numeric(format!(
        "scenario {}: no two-class sample in {MAX_GENERATE_ATTEMPTS} attempts",
        config.id()
    )))
}

/// Train (`n` rows) and test (`test_size` rows) sets for replication 0.
pub fn generate(config: &ScenarioConfig) -> Result<(Dataset, Dataset)> {
    generate_replication(config, 0)
}

/// Fresh train and test sets for one replication; the two sides use
/// disjoint stream labels `(seed; replication, side, generate, attempt)`.
pub fn generate_replication(
    config: &ScenarioConfig,
    replication: u64,
) -> Result<(Dataset, Dataset)> {
    config.validate()?;
    let train = draw_side(config, config.n, replication, 0)?;
    let test = draw_side(config, config.test_size, replication, 1)?;
    Ok((train, test))
}

/// The simulated scenario grid: six regression and six classification
/// `(n, p, rho)` settings.
pub fn scenario_grid() -> Vec<ScenarioConfig> {
    const REGRESSION: [(usize, usize, f64); 6] = [
        (200, 25, 0.05),
        (200, 25, 0.5),
        (25, 200, 0.05),
        (25, 200, 0.5),
        (50, 1000, 0.05),
        (1000, 50, 0.05),
    ];
    const CLASSIFICATION: [(usize, usize, f64); 6] = [
        (200, 25, 0.05),
        (200, 25, 0.5),
        (50, 200, 0.05),
        (50, 200, 0.5),
        (50, 1000, 0.05),
        (1000, 50, 0.05),
    ];
    REGRESSION
        .iter()
        .map(|&(n, p, rho)| ScenarioConfig::new(n, p, rho, Task::Regression))
        .chain(
            CLASSIFICATION
                .iter()
                .map(|&(n, p, rho)| ScenarioConfig::new(n, p, rho, Task::Classification)),
        )
        .collect()
}
