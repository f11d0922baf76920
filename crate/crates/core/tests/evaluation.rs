mod common;

use std::sync::Mutex;

use common::{linear_dataset, logistic_dataset};
use rssl::evaluation::{builtin_methods, MethodOutput, MethodSettings, RunContext};
use rssl::synthetic::ScenarioConfig;
use rssl::{avte, DataSource, Dataset, Method, MethodId, Protocol, Result, SubsetSize, Task};

/// Predicts the truth plus a fixed error vector per replication.
struct Offset {
    errors: Vec<Vec<f64>>,
}

impl Method for Offset {
    fn id(&self) -> String {
        "offset".into()
    }
    fn stream_tag(&self) -> u64 {
        100
    }
    fn fit_predict(
        &self,
        _train: &Dataset,
        test: &Dataset,
        ctx: &RunContext,
    ) -> Result<MethodOutput> {
        let e = &self.errors[ctx.replication as usize];
        Ok(MethodOutput {
            predictions: test.target().iter().zip(e).map(|(t, e)| t + e).collect(),
            weights: None,
        })
    }
}

/// (replication, train targets, test targets)
type Seen = (u64, Vec<f64>, Vec<f64>);

/// Predicts the training mean and records what it saw.
struct Recorder {
    name: &'static str,
    tag: u64,
    seen: Mutex<Vec<Seen>>,
}

impl Recorder {
    fn new(name: &'static str, tag: u64) -> Self {
        Recorder {
            name,
            tag,
            seen: Mutex::new(Vec::new()),
        }
    }

    fn sorted(&self) -> Vec<Seen> {
        let mut v = self.seen.lock().unwrap().clone();
        v.sort_by_key(|e| e.0);
        v
    }
}

impl Method for Recorder {
    fn id(&self) -> String {
        self.name.into()
    }
    fn stream_tag(&self) -> u64 {
        self.tag
    }
    fn fit_predict(
        &self,
        train: &Dataset,
        test: &Dataset,
        ctx: &RunContext,
    ) -> Result<MethodOutput> {
        self.seen.lock().unwrap().push((
            ctx.replication,
            train.target().to_vec(),
            test.target().to_vec(),
        ));
        let mean = train.target().iter().sum::<f64>() / train.n() as f64;
        let seed_term = (ctx.seed % 1000) as f64 * 1e-6;
        Ok(MethodOutput {
            predictions: vec![mean + seed_term; test.n()],
            weights: None,
        })
    }
}

fn four_rows() -> DataSource {
    let x = nalgebra::DMatrix::from_row_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
    let data = Dataset::from_matrix(x, vec![10.0, 20.0, 30.0, 40.0], Task::Regression).unwrap();
    DataSource::Dataset {
        name: "four".into(),
        data,
    }
}

#[test]
fn hand_computed_mean_and_std() {
    let stub = Offset {
        errors: vec![vec![0.0, 2.0], vec![2.0, 2.0]],
    };
    let protocol = Protocol {
        replications: 2,
        split_fraction: 0.5,
    };
    let report = avte(&four_rows(), &[&stub], &protocol, 1).unwrap();
    let m = &report.methods[0];
    assert_eq!(m.losses, vec![2.0, 4.0]);
    assert_eq!(m.mean, 3.0);
    assert_eq!(m.std, 2f64.sqrt());
}

#[test]
fn methods_share_each_replication_data() {
    let a = Recorder::new("a", 1);
    let b = Recorder::new("b", 2);
    let source = DataSource::Dataset {
        name: "lin".into(),
        data: linear_dataset(30, 3, &[1.0, 1.0, 1.0], 1.0, 1),
    };
    let protocol = Protocol {
        replications: 5,
        split_fraction: 0.7,
    };
    avte(&source, &[&a, &b], &protocol, 3).unwrap();
    let (sa, sb) = (a.sorted(), b.sorted());
    assert_eq!(sa.len(), 5);
    assert_eq!(sa, sb);
    // replications differ from one another
    assert_ne!(sa[0].1, sa[1].1);
    for (_, train, test) in &sa {
        assert_eq!((train.len(), test.len()), (21, 9));
    }
}

#[test]
fn classification_splits_keep_both_classes() {
    let a = Recorder::new("a", 1);
    let source = DataSource::Dataset {
        name: "log".into(),
        data: logistic_dataset(20, 2, 4),
    };
    avte(
        &source,
        &[&a],
        &Protocol {
            replications: 10,
            split_fraction: 0.7,
        },
        5,
    )
    .unwrap();
    for (_, train, test) in a.sorted() {
        for part in [train, test] {
            assert!(part.contains(&0.0) && part.contains(&1.0));
        }
    }
}

#[test]
fn losses_do_not_depend_on_method_order_or_count() {
    let source = DataSource::Scenario(ScenarioConfig::new(30, 5, 0.2, Task::Regression));
    let protocol = Protocol {
        replications: 4,
        split_fraction: 0.7,
    };
    let (a1, b1) = (Recorder::new("a", 1), Recorder::new("b", 2));
    let (a2, b2) = (Recorder::new("a", 1), Recorder::new("b", 2));
    let ab = avte(&source, &[&a1, &b1], &protocol, 9).unwrap();
    let ba = avte(&source, &[&b2, &a2], &protocol, 9).unwrap();
    assert_eq!(ab.method("a"), ba.method("a"));
    assert_eq!(ab.method("b"), ba.method("b"));
    let alone = avte(&source, &[&Recorder::new("a", 1)], &protocol, 9).unwrap();
    assert_eq!(alone.method("a"), ab.method("a"));
}

#[test]
fn shorter_runs_are_prefixes() {
    let source = DataSource::Scenario(ScenarioConfig::new(30, 5, 0.2, Task::Regression));
    let m = Recorder::new("a", 1);
    let short = avte(
        &source,
        &[&m],
        &Protocol {
            replications: 3,
            split_fraction: 0.7,
        },
        2,
    )
    .unwrap();
    let long = avte(
        &source,
        &[&m],
        &Protocol {
            replications: 6,
            split_fraction: 0.7,
        },
        2,
    )
    .unwrap();
    assert_eq!(short.methods[0].losses[..], long.methods[0].losses[..3]);
}

#[test]
fn builtin_run_is_reproducible_and_consistent() {
    let settings = MethodSettings {
        learners: 15,
        subset_size: SubsetSize::Auto,
        forest: rssl::forest::ForestConfig {
            trees: 10,
            ..Default::default()
        },
        ..Default::default()
    };
    let ids = MethodId::ALL;
    let built = builtin_methods(&ids, &settings);
    let refs: Vec<&dyn Method> = built.iter().map(|m| m as &dyn Method).collect();
    let source = DataSource::Scenario(ScenarioConfig::new(40, 8, 0.3, Task::Regression));
    let protocol = Protocol {
        replications: 3,
        split_fraction: 0.7,
    };
    let first = avte(&source, &refs, &protocol, 21).unwrap();
    let again = avte(&source, &refs, &protocol, 21).unwrap();
    assert_eq!(first, again);
    let other = avte(&source, &refs, &protocol, 22).unwrap();
    assert_ne!(first.methods[0].losses, other.methods[0].losses);
    for m in &first.methods {
        let mean = m.losses.iter().sum::<f64>() / m.losses.len() as f64;
        assert!((m.mean - mean).abs() <= 1e-12);
    }
    let names: Vec<&str> = first.methods.iter().map(|m| m.id.as_str()).collect();
    assert_eq!(
        names,
        ["single", "uniform", "adaptive-corr", "adaptive-fstat", "rf"]
    );
    assert!(first.better_flag.is_some());
    assert_eq!(first.weights_used.as_ref().map(Vec::len), Some(8));
}

#[test]
fn rejects_empty_requests() {
    let source = four_rows();
    let m = Recorder::new("a", 1);
    assert!(avte(&source, &[], &Protocol::default(), 1).is_err());
    assert!(avte(
        &source,
        &[&m],
        &Protocol {
            replications: 0,
            split_fraction: 0.5
        },
        1
    )
    .is_err());
}
