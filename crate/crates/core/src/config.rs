//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Keys come from a closed set ([`KEYS`]); anything else is rejected, as is
//! a key given twice. Every field is optional so a file can be layered under
//! command-line flags with [`RunConfig::overlay`].
//!
//! ```text
//! # bench defaults
//! seed = 42
//! rssl.learners = 450
//! rssl.weighting = correlation
//! protocol.replications = 30
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::data::Task;
use crate::ensemble::{SubsetSize, DEFAULT_LEARNERS};
use crate::error::{Error, Result};
use crate::evaluation::{MethodId, MethodSettings, Protocol};
use crate::forest::ForestConfig;
use crate::learners::FitConfig;
use crate::synthetic::ScenarioConfig;
use crate::weighting::Scheme;

/// Every accepted key, in canonical order.
pub const KEYS: [&str; 26] = [
    "data",
    "target",
    "task",
    "out",
    "seed",
    "threads",
    "methods",
    "rssl.learners",
    "rssl.subset_size",
    "rssl.weighting",
    "fit.ridge_jitter",
    "fit.max_iter",
    "fit.tol",
    "fit.svd_rcond",
    "forest.trees",
    "forest.mtry",
    "forest.min_leaf",
    "forest.max_depth",
    "protocol.replications",
    "protocol.split",
    "scenario.n",
    "scenario.p",
    "scenario.rho",
    "scenario.k_true",
    "scenario.noise_sd",
    "scenario.test_size",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub target: Option<String>,
    pub task: Option<Task>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub methods: Option<Vec<MethodId>>,
    pub learners: Option<usize>,
    pub subset_size: Option<SubsetSize>,
    pub weighting: Option<Scheme>,
    pub ridge_jitter: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub svd_rcond: Option<f64>,
    pub trees: Option<usize>,
    pub mtry: Option<usize>,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub replications: Option<usize>,
    pub split: Option<f64>,
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub rho: Option<f64>,
    pub k_true: Option<usize>,
    pub noise_sd: Option<f64>,
    pub test_size: Option<usize>,
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| Error::config(format!("config line {}: {msg}", lineno + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let canonical = KEYS
            .iter()
            .copied()
            .find(|k| *k == key)
            .ok_or_else(|| at(format!("unknown key '{key}'")))?;
        if seen.contains(&canonical) {
            return Err(at(format!("duplicate key '{key}'")));
        }
        seen.push(canonical);
        if value.is_empty() {
            return Err(at(format!("empty value for '{key}'")));
        }
        config
            .set(canonical, value)
            .map_err(|e| at(e.to_string()))?;
    }
    Ok(config)
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::config(format!("invalid value '{value}' for {key}")))
}

fn positive(key: &str, value: &str) -> Result<usize> {
    match parse_num::<usize>(key, value)? {
        0 => Err(Error::config(format!("{key} must be >= 1"))),
        v => Ok(v),
    }
}

fn finite(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse_num(key, value)?;
    if !v.is_finite() {
        return Err(Error::config(format!("{key} must be finite")));
    }
    Ok(v)
}

pub fn parse_methods(value: &str) -> Result<Vec<MethodId>> {
    let ids = value
        .split(',')
        .map(|s| s.trim().parse::<MethodId>())
        .collect::<Result<Vec<_>>>()?;
    for (i, id) in ids.iter().enumerate() {
        if ids[..i].contains(id) {
            return Err(Error::config(format!("method '{id}' listed twice")));
        }
    }
    Ok(ids)
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "target" => self.target = Some(value.to_string()),
            "task" => self.task = Some(value.parse()?),
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = Some(parse_num(key, value)?),
            "threads" => self.threads = Some(positive(key, value)?),
            "methods" => self.methods = Some(parse_methods(value)?),
            "rssl.learners" => self.learners = Some(positive(key, value)?),
            "rssl.subset_size" => self.subset_size = Some(value.parse()?),
            "rssl.weighting" => self.weighting = Some(value.parse()?),
            "fit.ridge_jitter" => self.ridge_jitter = Some(finite(key, value)?),
            "fit.max_iter" => self.max_iter = Some(positive(key, value)?),
            "fit.tol" => self.tol = Some(finite(key, value)?),
            "fit.svd_rcond" => self.svd_rcond = Some(finite(key, value)?),
            "forest.trees" => self.trees = Some(positive(key, value)?),
            "forest.mtry" => self.mtry = Some(positive(key, value)?),
            "forest.min_leaf" => self.min_leaf = Some(positive(key, value)?),
            "forest.max_depth" => self.max_depth = Some(positive(key, value)?),
            "protocol.replications" => self.replications = Some(positive(key, value)?),
            "protocol.split" => {
                let f = finite(key, value)?;
                if !(f > 0.0 && f < 1.0) {
                    return Err(Error::config(format!("{key} must lie in (0, 1), got {f}")));
                }
                self.split = Some(f);
            }
            "scenario.n" => self.n = Some(positive(key, value)?),
            "scenario.p" => self.p = Some(positive(key, value)?),
            "scenario.rho" => self.rho = Some(finite(key, value)?),
            "scenario.k_true" => self.k_true = Some(parse_num(key, value)?),
            "scenario.noise_sd" => self.noise_sd = Some(finite(key, value)?),
            "scenario.test_size" => self.test_size = Some(positive(key, value)?),
            other => return Err(Error::config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Present keys with their canonical textual values, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        fn put<T: ToString>(
            out: &mut Vec<(&'static str, String)>,
            key: &'static str,
            v: &Option<T>,
        ) {
            if let Some(v) = v {
                out.push((key, v.to_string()));
            }
        }
        let mut out = Vec::new();
        if let Some(d) = &self.data {
            out.push(("data", d.display().to_string()));
        }
        put(&mut out, "target", &self.target);
        put(&mut out, "task", &self.task);
        if let Some(o) = &self.out {
            out.push(("out", o.display().to_string()));
        }
        put(&mut out, "seed", &self.seed);
        put(&mut out, "threads", &self.threads);
        if let Some(m) = &self.methods {
            let list: Vec<&str> = m.iter().map(|id| id.as_str()).collect();
            out.push(("methods", list.join(",")));
        }
        put(&mut out, "rssl.learners", &self.learners);
        put(&mut out, "rssl.subset_size", &self.subset_size);
        put(&mut out, "rssl.weighting", &self.weighting);
        put(&mut out, "fit.ridge_jitter", &self.ridge_jitter);
        put(&mut out, "fit.max_iter", &self.max_iter);
        put(&mut out, "fit.tol", &self.tol);
        put(&mut out, "fit.svd_rcond", &self.svd_rcond);
        put(&mut out, "forest.trees", &self.trees);
        put(&mut out, "forest.mtry", &self.mtry);
        put(&mut out, "forest.min_leaf", &self.min_leaf);
        put(&mut out, "forest.max_depth", &self.max_depth);
        put(&mut out, "protocol.replications", &self.replications);
        put(&mut out, "protocol.split", &self.split);
        put(&mut out, "scenario.n", &self.n);
        put(&mut out, "scenario.p", &self.p);
        put(&mut out, "scenario.rho", &self.rho);
        put(&mut out, "scenario.k_true", &self.k_true);
        put(&mut out, "scenario.noise_sd", &self.noise_sd);
        put(&mut out, "scenario.test_size", &self.test_size);
        out
    }

    /// Renders the config in the file format; parses back to an equal value.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Copies every field that is set in `top` over `self`.
    pub fn overlay(&mut self, top: &RunConfig) {
        for (key, value) in top.entries() {
            self.set(key, &value)
                .expect("canonical values always parse");
        }
    }

    pub fn fit_config(&self) -> FitConfig {
        let d = FitConfig::default();
        FitConfig {
            ridge_jitter: self.ridge_jitter.unwrap_or(d.ridge_jitter),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            tol: self.tol.unwrap_or(d.tol),
            svd_rcond: self.svd_rcond.unwrap_or(d.svd_rcond),
        }
    }

    pub fn forest_config(&self) -> ForestConfig {
        let d = ForestConfig::default();
        ForestConfig {
            trees: self.trees.unwrap_or(d.trees),
            mtry: self.mtry.or(d.mtry),
            min_leaf: self.min_leaf.or(d.min_leaf),
            max_depth: self.max_depth.unwrap_or(d.max_depth),
            seed: d.seed,
        }
    }

    pub fn method_settings(&self) -> Result<MethodSettings> {
        let settings = MethodSettings {
            learners: self.learners.unwrap_or(DEFAULT_LEARNERS),
            subset_size: self.subset_size.unwrap_or(SubsetSize::Auto),
            fit: self.fit_config(),
            forest: self.forest_config(),
        };
        settings.fit.validate()?;
        Ok(settings)
    }

    pub fn protocol(&self) -> Protocol {
        let d = Protocol::default();
        Protocol {
            replications: self.replications.unwrap_or(d.replications),
            split_fraction: self.split.unwrap_or(d.split_fraction),
        }
    }

    /// The scenario named by `scenario.*`, when `n`, `p` and `rho` are set.
    pub fn scenario(&self) -> Result<Option<ScenarioConfig>> {
        let (n, p, rho) = match (self.n, self.p, self.rho) {
            (None, None, None) => return Ok(None),
            (Some(n), Some(p), Some(rho)) => (n, p, rho),
            _ => return Err(Error::config("a scenario needs all of n, p and rho")),
        };
        let mut s = ScenarioConfig::new(n, p, rho, self.task.unwrap_or(Task::Regression));
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(k) = self.k_true {
            s.k_true = k;
        }
        if let Some(sd) = self.noise_sd {
            s.noise_sd = sd;
        }
        if let Some(m) = self.test_size {
            s.test_size = m;
        }
        s.validate()?;
        Ok(Some(s))
    }
}
