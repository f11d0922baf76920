//! Adaptive random subspace learning.
//!
//! An RSSL ensemble fits `L` base learners (least-squares regression or
//! logistic regression), each on a bootstrap replicate of the training rows
//! and a random subset of `d` features. In the adaptive variant the subset is
//! drawn with probabilities proportional to a feature/response association
//! score (squared correlation or an F statistic) computed once on the
//! training set. Predictions are averaged (regression) or majority-voted
//! (classification).
//!
//! Besides the ensemble itself the crate carries what is needed to compare
//! it against a single base learner, uniform subspace bagging and a random
//! forest: simulated scenarios, a replicated train/test protocol, and report
//! rendering.

pub mod config;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod learners;
pub mod report;
pub mod rng;
pub mod sampling;
pub mod synthetic;
pub mod weighting;

pub use data::{load_csv, parse_csv, split, Dataset, Task, TrainTestSplit};
pub use ensemble::{train_rssl, EnsembleModel, RsslConfig, SubsetSize};
pub use error::{Error, Result};
pub use evaluation::{avte, BenchmarkReport, DataSource, Method, MethodId, Protocol};
pub use rng::RngStream;
pub use weighting::{FeatureWeights, Scheme};
