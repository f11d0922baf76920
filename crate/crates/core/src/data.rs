//! Datasets, CSV ingestion and train/test splitting.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(Error::config(format!("unknown task '{other}'"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A numeric feature matrix with its response.
///
/// Classification targets are stored as `0.0` / `1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    target: Vec<f64>,
    feature_names: Vec<String>,
    target_name: String,
    task: Task,
    class_labels: Option<[String; 2]>,
}

impl Dataset {
    pub fn new(
        features: DMatrix<f64>,
        target: Vec<f64>,
        feature_names: Vec<String>,
        task: Task,
    ) -> Result<Self> {
        let (n, p) = features.shape();
        if n == 0 || p == 0 {
            return Err(Error::data(format!(
                "dataset must be non-empty, got {n}x{p}"
            )));
        }
        if target.len() != n {
            return Err(Error::data(format!(
                "target length {} does not match {n} rows",
                target.len()
            )));
        }
        if feature_names.len() != p {
            return Err(Error::data(format!(
                "{} feature names for {p} columns",
                feature_names.len()
            )));
        }
        if let Some(idx) = features.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % n, idx / n);
            return Err(Error::data(format!(
                "non-finite feature value at row {row}, column '{}'",
                feature_names[col]
            )));
        }
        match task {
            Task::Regression => {
                if let Some(row) = target.iter().position(|v| !v.is_finite()) {
                    return Err(Error::data(format!("non-finite target at row {row}")));
                }
            }
            Task::Classification => {
                if let Some(row) = target.iter().position(|&v| v != 0.0 && v != 1.0) {
                    return Err(Error::data(format!(
                        "classification target at row {row} is {}, expected 0 or 1",
                        target[row]
                    )));
                }
            }
        }
        Ok(Dataset {
            features,
            target,
            feature_names,
            target_name: "y".to_string(),
            task,
            class_labels: None,
        })
    }

    /// Builds a dataset with generated feature names `x1..xp`.
    pub fn from_matrix(features: DMatrix<f64>, target: Vec<f64>, task: Task) -> Result<Self> {
        let names = (1..=features.ncols()).map(|j| format!("x{j}")).collect();
        Self::new(features, target, names, task)
    }

    pub fn with_target_name(mut self, name: impl Into<String>) -> Self {
        self.target_name = name.into();
        self
    }

    /// Raw labels for class ids 0 and 1, as read from a file.
    pub fn with_class_labels(mut self, labels: [String; 2]) -> Self {
        self.class_labels = Some(labels);
        self
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn class_labels(&self) -> Option<&[String; 2]> {
        self.class_labels.as_ref()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }

    /// Number of rows in class 0 and class 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.target.iter().filter(|&&v| v == 1.0).count();
        [self.n() - ones, ones]
    }

    /// Dataset restricted to `rows` (repetition allowed), preserving metadata.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let features = self.features.select_rows(rows.iter());
        let target = rows.iter().map(|&i| self.target[i]).collect();
        Dataset {
            features,
            target,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            task: self.task,
            class_labels: self.class_labels.clone(),
        }
    }

    /// Writes the dataset as CSV with the target as the last column.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push(&self.target_name);
        out.write_record(&header).map_err(csv_error)?;
        let mut record = Vec::with_capacity(self.p() + 1);
        for i in 0..self.n() {
            record.clear();
            record.extend(self.features.row(i).iter().map(|v| v.to_string()));
            let y = self.target[i];
            match (&self.class_labels, self.task) {
                (Some(labels), Task::Classification) => {
                    record.push(labels[y as usize].clone());
                }
                _ => record.push(y.to_string()),
            }
            out.write_record(&record).map_err(csv_error)?;
        }
        out.flush()
            .map_err(|e| Error::data(format!("csv write failed: {e}")))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::data(format!("csv: {e}"))
}

/// Reads a dataset from a CSV file with a header row.
pub fn load_csv(path: impl AsRef<Path>, target_name: &str, task: Task) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(std::io::BufReader::new(file), target_name, task)
}

/// Parses CSV text: header row first, numeric features, target column by name.
///
/// Classification targets must have at most two distinct raw values. They are
/// mapped to 0 and 1 in ascending order: numerically when both parse as
/// numbers, otherwise by string comparison.
pub fn parse_csv<R: Read>(reader: R, target_name: &str, task: Task) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(csv_error)?,
        None => return Err(Error::data("empty file")),
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let target_cols: Vec<usize> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.as_str() == target_name)
        .map(|(i, _)| i)
        .collect();
    let target_col = match target_cols.as_slice() {
        [] => {
            return Err(Error::data(format!(
                "target column '{target_name}' not found"
            )))
        }
        [c] => *c,
        _ => {
            return Err(Error::data(format!(
                "duplicate target column '{target_name}'"
            )))
        }
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    let p = feature_names.len();
    if p == 0 {
        return Err(Error::data("no feature columns"));
    }

    let mut values: Vec<f64> = Vec::new();
    let mut raw_target: Vec<String> = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec.map_err(csv_error)?;
        let row = line + 1;
        for (col, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if col == target_col {
                raw_target.push(cell.to_string());
                continue;
            }
            values.push(parse_number(cell).map_err(|why| {
                Error::data(format!("{why} in column '{}' at row {row}", header[col]))
            })?);
        }
    }
    let n = raw_target.len();
    if n == 0 {
        return Err(Error::data("no data rows"));
    }

    let features = DMatrix::from_row_slice(n, p, &values);
    match task {
        Task::Regression => {
            let target = raw_target
                .iter()
                .enumerate()
                .map(|(i, cell)| {
                    parse_number(cell)
                        .map_err(|why| Error::data(format!("{why} in target at row {}", i + 1)))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(Dataset::new(features, target, feature_names, task)?.with_target_name(target_name))
        }
        Task::Classification => {
            let distinct: BTreeSet<&str> = raw_target.iter().map(String::as_str).collect();
            if distinct.iter().any(|s| s.is_empty()) {
                return Err(Error::data("missing value in target"));
            }
            if distinct.len() > 2 {
                return Err(Error::data(format!(
                    "classification target has {} distinct labels, at most 2 supported",
                    distinct.len()
                )));
            }
            let mut labels: Vec<&str> = distinct.into_iter().collect();
            let numeric: Option<Vec<f64>> = labels.iter().map(|s| parse_number(s).ok()).collect();
            if let Some(nums) = numeric {
                if nums.len() == 2 && nums[1] < nums[0] {
                    labels.swap(0, 1);
                }
            }
            let target = raw_target
                .iter()
                .map(|s| if s == labels[0] { 0.0 } else { 1.0 })
                .collect();
            let class_labels = [
                labels[0].to_string(),
                labels.get(1).copied().unwrap_or(labels[0]).to_string(),
            ];
            let ds =
                Dataset::new(features, target, feature_names, task)?.with_target_name(target_name);
            Ok(if labels.len() == 2 {
                ds.with_class_labels(class_labels)
            } else {
                ds
            })
        }
    }
}

fn parse_number(cell: &str) -> std::result::Result<f64, &'static str> {
    if cell.is_empty() {
        return Err("missing value");
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err("non-finite value"),
        Err(_) => Err("non-numeric feature"),
    }
}

/// Disjoint train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainTestSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

/// Random train/test split; stratified by class for classification.
///
/// The train side of each stratum gets `round(fraction * size)` rows, clamped
/// so both sides keep at least one row.
pub fn split(
    dataset: &Dataset,
    train_fraction: f64,
    rng: &mut RngStream,
) -> Result<TrainTestSplit> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let strata: Vec<Vec<usize>> = match dataset.task() {
        Task::Regression => {
            if dataset.n() < 2 {
                return Err(Error::data("splitting needs at least 2 rows"));
            }
            vec![(0..dataset.n()).collect()]
        }
        Task::Classification => {
            let mut classes = vec![Vec::new(), Vec::new()];
            for (i, &y) in dataset.target().iter().enumerate() {
                classes[y as usize].push(i);
            }
            if let Some(c) = classes.iter().position(|members| members.len() < 2) {
                return Err(Error::data(format!(
                    "class {c} has {} rows, stratified splitting needs at least 2",
                    classes[c].len()
                )));
            }
            classes
        }
    };

    let mut train = Vec::with_capacity(dataset.n());
    let mut test = Vec::with_capacity(dataset.n());
    for mut members in strata {
        let size = members.len();
        let take = ((train_fraction * size as f64).round() as usize).clamp(1, size - 1);
        rng.shuffle(&mut members);
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(TrainTestSplit {
        train_indices: train,
        test_indices: test,
    })
}
