//! `rssl`: simulate scenarios, benchmark RSSL ensembles against baselines,
//! compare over the scenario grid, and render saved results.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rssl::config::{load_config, RunConfig};
use rssl::evaluation::{builtin_methods, rho_sweep, sweep_csv, sweep_rows, MethodSettings};
use rssl::report::{
    comparison_rows, parse_results, render_comparison, render_summary, render_svg, ResultsDocument,
    TableFormat,
};
use rssl::synthetic::{generate, scenario_grid, ScenarioConfig};
use rssl::{avte, load_csv, DataSource, Error, Method, MethodId, Result, Scheme, Task};

const DEFAULT_SEED: u64 = 0;
const SEED_ENV: &str = "RSSL_SEED";

#[derive(Parser)]
#[command(
    name = "rssl",
    version,
    about = "Adaptive random subspace learning toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Write train.csv, test.csv and scenario.json for a simulated scenario.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write every scenario of the benchmark grid into its own directory.
        #[arg(long)]
        grid: bool,
    },
    /// Average test error of the requested methods on a CSV dataset or a scenario.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// CSV file with a header row.
        #[arg(long)]
        data: Option<String>,
        /// Target column name.
        #[arg(long)]
        target: Option<String>,
        /// Comma list of methods: single, uniform, adaptive-corr, adaptive-fstat, rf.
        #[arg(long)]
        methods: Option<String>,
        /// Comma list of correlation levels; runs one benchmark per level.
        #[arg(long)]
        rhos: Option<String>,
        /// Table format: text, md or csv.
        #[arg(long)]
        format: Option<String>,
    },
    /// Benchmark the whole scenario grid for one task and print the comparison table.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        task: Option<String>,
        /// Table format: text, md or csv.
        #[arg(long)]
        format: Option<String>,
    },
    /// Render tables and an SVG plot from a results.json file.
    Report {
        /// Path to results.json.
        results: PathBuf,
        /// Output directory (defaults to the results file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Table format: text, md or csv.
        #[arg(long, default_value = "md")]
        format: String,
        /// Plot losses on a logarithmic axis.
        #[arg(long)]
        log_scale: bool,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// Flat `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (falls back to the config file, then RSSL_SEED, then 0).
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// regression or classification.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    k_true: Option<String>,
    #[arg(long)]
    noise_sd: Option<String>,
    #[arg(long)]
    test_size: Option<String>,
}

#[derive(Args)]
struct ModelArgs {
    /// Adaptive weighting: uniform, correlation or fstat.
    #[arg(long)]
    weighting: Option<String>,
    /// Ensemble size L.
    #[arg(long)]
    learners: Option<String>,
    /// Features per learner, or "auto".
    #[arg(long)]
    subset_size: Option<String>,
    /// Forest size.
    #[arg(long)]
    trees: Option<String>,
    #[arg(long)]
    mtry: Option<String>,
    #[arg(long)]
    min_leaf: Option<String>,
    #[arg(long)]
    max_depth: Option<String>,
    /// Number of train/test replications R.
    #[arg(long)]
    replications: Option<String>,
    /// Train fraction for CSV datasets.
    #[arg(long)]
    split: Option<String>,
}

type Pairs = Vec<(&'static str, String)>;

fn push(pairs: &mut Pairs, key: &'static str, value: &Option<String>) {
    if let Some(v) = value {
        pairs.push((key, v.clone()));
    }
}

impl CommonArgs {
    fn pairs(&self, out: &mut Pairs) {
        push(out, "seed", &self.seed);
        push(out, "threads", &self.threads);
        push(out, "out", &self.out);
    }
}

impl ScenarioArgs {
    fn pairs(&self, out: &mut Pairs) {
        push(out, "scenario.n", &self.n);
        push(out, "scenario.p", &self.p);
        push(out, "scenario.rho", &self.rho);
        push(out, "task", &self.task);
        push(out, "scenario.k_true", &self.k_true);
        push(out, "scenario.noise_sd", &self.noise_sd);
        push(out, "scenario.test_size", &self.test_size);
    }
}

impl ModelArgs {
    fn pairs(&self, out: &mut Pairs) {
        push(out, "rssl.weighting", &self.weighting);
        push(out, "rssl.learners", &self.learners);
        push(out, "rssl.subset_size", &self.subset_size);
        push(out, "forest.trees", &self.trees);
        push(out, "forest.mtry", &self.mtry);
        push(out, "forest.min_leaf", &self.min_leaf);
        push(out, "forest.max_depth", &self.max_depth);
        push(out, "protocol.replications", &self.replications);
        push(out, "protocol.split", &self.split);
    }
}

/// Settings after layering flags over the config file, plus the flags as
/// given (for the invocation echo).
struct Resolved {
    config: RunConfig,
    seed: u64,
    flags: Pairs,
}

fn resolve(config_path: Option<&Path>, flags: Pairs) -> Result<Resolved> {
    let mut config = match config_path {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    let mut top = RunConfig::default();
    for (key, value) in &flags {
        top.set(key, value)
            .map_err(|e| Error::config(format!("--{}: {e}", flag_name(key))))?;
    }
    config.overlay(&top);
    let seed = match config.seed {
        Some(s) => s,
        None => match std::env::var(SEED_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                Error::config(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))
            })?,
            Err(_) => DEFAULT_SEED,
        },
    };
    config.seed = Some(seed);
    if let Some(threads) = config.threads {
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Ok(Resolved {
        config,
        seed,
        flags,
    })
}

fn flag_name(key: &str) -> String {
    key.rsplit('.').next().unwrap_or(key).replace('_', "-")
}

/// Flags that shape the results; thread count and output location do not.
fn invocation(command: &str, flags: &Pairs) -> Value {
    let args: serde_json::Map<String, Value> = flags
        .iter()
        .filter(|(k, _)| !matches!(*k, "threads" | "out"))
        .map(|(k, v)| (flag_name(k), Value::String(v.clone())))
        .collect();
    json!({ "command": command, "flags": args })
}

fn out_dir(config: &RunConfig) -> PathBuf {
    config.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn table_format(value: Option<&str>) -> Result<TableFormat> {
    value.unwrap_or("text").parse()
}

fn table_file(format: TableFormat) -> &'static str {
    match format {
        TableFormat::Text => "table.txt",
        TableFormat::Markdown => "table.md",
        TableFormat::Csv => "table.csv",
    }
}

fn scenario_json(s: &ScenarioConfig) -> String {
    let value = json!({
        "id": s.id(),
        "n": s.n,
        "p": s.p,
        "rho": s.rho,
        "task": s.task,
        "seed": s.seed,
        "k_true": s.k_true,
        "noise_sd": s.noise_sd,
        "test_size": s.test_size,
        "beta": s.true_coefficients(),
    });
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

fn write_scenario(s: &ScenarioConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (train, test) = generate(s)?;
    train.save_csv(dir.join("train.csv"))?;
    test.save_csv(dir.join("test.csv"))?;
    write_file(&dir.join("scenario.json"), &scenario_json(s))
}

fn cmd_simulate(common: &CommonArgs, scenario: &ScenarioArgs, grid: bool) -> Result<()> {
    let mut flags = Pairs::new();
    common.pairs(&mut flags);
    scenario.pairs(&mut flags);
    let r = resolve(common.config.as_deref(), flags)?;
    let dir = out_dir(&r.config);
    if grid {
        let task_filter = r.config.task;
        for s in scenario_grid() {
            if task_filter.is_some_and(|t| t != s.task) {
                continue;
            }
            let s = s.with_seed(r.seed);
            write_scenario(&s, &dir.join(s.id()))?;
        }
        return Ok(());
    }
    let s = r
        .config
        .scenario()?
        .ok_or_else(|| Error::config("simulate needs --n, --p and --rho, or --grid"))?;
    write_scenario(&s, &dir)
}

fn settings_echo(settings: &MethodSettings, methods: &[MethodId]) -> Value {
    let f = &settings.forest;
    json!({
        "methods": methods.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "learners": settings.learners,
        "subset_size": settings.subset_size.to_string(),
        "fit": settings.fit,
        "forest": {
            "trees": f.trees,
            "mtry": f.mtry,
            "min_leaf": f.min_leaf,
            "max_depth": f.max_depth,
        },
    })
}

fn default_scheme(task: Task) -> Scheme {
    match task {
        Task::Regression => Scheme::Correlation,
        Task::Classification => Scheme::FStatistic,
    }
}

fn default_methods(task: Task, scheme: Option<Scheme>) -> Vec<MethodId> {
    let adaptive = MethodId::for_scheme(scheme.unwrap_or(default_scheme(task)));
    let mut ids = vec![MethodId::SingleBase, MethodId::UniformRssl];
    if adaptive != MethodId::UniformRssl {
        ids.push(adaptive);
    }
    ids.push(MethodId::RandomForest);
    ids
}

fn parse_rhos(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|r| r.is_finite())
                .ok_or_else(|| Error::config(format!("--rhos: invalid value '{s}'")))
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    common: &CommonArgs,
    scenario: &ScenarioArgs,
    model: &ModelArgs,
    data: &Option<String>,
    target: &Option<String>,
    methods: &Option<String>,
    rhos: &Option<String>,
    format: &Option<String>,
) -> Result<()> {
    let mut flags = Pairs::new();
    common.pairs(&mut flags);
    push(&mut flags, "data", data);
    push(&mut flags, "target", target);
    push(&mut flags, "methods", methods);
    scenario.pairs(&mut flags);
    model.pairs(&mut flags);
    let format = table_format(format.as_deref())?;
    let sweep_levels = rhos.as_deref().map(parse_rhos).transpose()?;
    let mut r = resolve(common.config.as_deref(), flags)?;
    if let Some(text) = rhos {
        r.flags.push(("rhos", text.clone()));
    }
    let c = &r.config;
    let settings = c.method_settings()?;
    let protocol = c.protocol();

    let source =
        match (&c.data, c.n) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "give either --data or a scenario (--n, --p, --rho), not both",
                ))
            }
            (Some(path), None) => {
                let task = c.task.unwrap_or(Task::Regression);
                let target = c.target.as_deref().unwrap_or("y");
                let data = load_csv(path, target, task)?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                DataSource::Dataset { name, data }
            }
            (None, _) if sweep_levels.is_some() => {
                // the swept rho is a placeholder until each level replaces it
                let mut probe = c.clone();
                probe.rho.get_or_insert(0.0);
                DataSource::Scenario(
                    probe
                        .scenario()?
                        .ok_or_else(|| Error::config("--rhos needs a scenario (--n, --p)"))?,
                )
            }
            (None, _) => DataSource::Scenario(c.scenario()?.ok_or_else(|| {
                Error::config("bench needs --data or a scenario (--n, --p, --rho)")
            })?),
        };
    let task = source.task();
    let ids = c
        .methods
        .clone()
        .unwrap_or_else(|| default_methods(task, c.weighting));
    let built = builtin_methods(&ids, &settings);
    let refs: Vec<&dyn Method> = built.iter().map(|m| m as &dyn Method).collect();
    let echo = settings_echo(&settings, &ids);
    let invocation = invocation("bench", &r.flags);
    let dir = out_dir(c);

    let doc = match (&sweep_levels, &source) {
        (Some(levels), DataSource::Scenario(base)) => {
            let sweep = rho_sweep(base, levels, &refs, &protocol, r.seed)?;
            write_file(&dir.join("sweep.csv"), &sweep_csv(&sweep_rows(&sweep)))?;
            ResultsDocument::from_sweep(base, &sweep, invocation, echo)?
        }
        (Some(_), DataSource::Dataset { .. }) => {
            return Err(Error::config("--rhos only applies to scenarios"))
        }
        (None, _) => {
            let report = avte(&source, &refs, &protocol, r.seed)?;
            ResultsDocument::from_report(&report, invocation, echo)
        }
    };
    write_file(&dir.join("results.json"), &doc.to_json())?;
    let table = render_summary(&doc, format);
    write_file(&dir.join(table_file(format)), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_compare(
    common: &CommonArgs,
    model: &ModelArgs,
    task: &Option<String>,
    format: &Option<String>,
) -> Result<()> {
    let mut flags = Pairs::new();
    common.pairs(&mut flags);
    push(&mut flags, "task", task);
    model.pairs(&mut flags);
    let format = table_format(format.as_deref())?;
    let r = resolve(common.config.as_deref(), flags)?;
    let c = &r.config;
    let task = c.task.unwrap_or(Task::Regression);
    let schemes = match c.weighting {
        Some(s) => vec![s],
        None => match task {
            Task::Regression => vec![Scheme::Correlation, Scheme::FStatistic],
            Task::Classification => vec![Scheme::FStatistic],
        },
    };
    let mut ids = vec![MethodId::SingleBase, MethodId::UniformRssl];
    for s in &schemes {
        let id = MethodId::for_scheme(*s);
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids.push(MethodId::RandomForest);
    let settings = c.method_settings()?;
    let protocol = c.protocol();
    let built = builtin_methods(&ids, &settings);
    let refs: Vec<&dyn Method> = built.iter().map(|m| m as &dyn Method).collect();
    let echo = settings_echo(&settings, &ids);
    let dir = out_dir(c);

    let grid: Vec<ScenarioConfig> = scenario_grid()
        .into_iter()
        .filter(|s| s.task == task)
        .collect();
    let mut results = Vec::with_capacity(grid.len());
    let mut long = String::from("task,n,p,rho,method,mean,std\n");
    for (k, s) in grid.iter().enumerate() {
        let report = avte(&DataSource::Scenario(s.clone()), &refs, &protocol, r.seed)?;
        eprintln!("[{}/{}] {}", k + 1, grid.len(), s.id());
        for m in &report.methods {
            long.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                task, s.n, s.p, s.rho, m.id, m.mean, m.std
            ));
        }
        let doc =
            ResultsDocument::from_report(&report, invocation("compare", &r.flags), echo.clone());
        write_file(
            &dir.join("results").join(format!("{}.json", s.id())),
            &doc.to_json(),
        )?;
        results.push((s.clone(), report));
    }
    let table = render_comparison(task, &comparison_rows(&results, &schemes), format);
    write_file(&dir.join(table_file(format)), &table)?;
    write_file(&dir.join("compare.csv"), &long)?;
    print!("{table}");
    Ok(())
}

fn cmd_report(results: &Path, out: &Option<PathBuf>, format: &str, log_scale: bool) -> Result<()> {
    let format: TableFormat = format.parse()?;
    let text = std::fs::read_to_string(results).map_err(|e| Error::io(results, e))?;
    let doc = parse_results(&text)?;
    let dir = out.clone().unwrap_or_else(|| {
        results
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    let table = render_summary(&doc, format);
    write_file(&dir.join(table_file(format)), &table)?;
    write_file(&dir.join("plot.svg"), &render_svg(&doc, log_scale))?;
    print!("{table}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate {
            common,
            scenario,
            grid,
        } => cmd_simulate(common, scenario, *grid),
        Command::Bench {
            common,
            scenario,
            model,
            data,
            target,
            methods,
            rhos,
            format,
        } => cmd_bench(common, scenario, model, data, target, methods, rhos, format),
        Command::Compare {
            common,
            model,
            task,
            format,
        } => cmd_compare(common, model, task, format),
        Command::Report {
            results,
            out,
            format,
            log_scale,
        } => cmd_report(results, out, format, *log_scale),
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Data(_) | Error::Io { .. } | Error::Json(_) => 2,
        Error::Numeric(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rssl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
