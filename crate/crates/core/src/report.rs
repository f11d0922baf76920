//! Output formats: the results JSON document, comparison tables and SVG
//! plots.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::Task;
use crate::error::{Error, Result};
use crate::evaluation::{BenchmarkReport, MethodId};
use crate::synthetic::ScenarioConfig;
use crate::weighting::Scheme;

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub id: String,
    pub mean: f64,
    pub std: f64,
    pub losses: Vec<f64>,
    /// Correlation level, for sweep entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

/// Contents of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsDocument {
    pub schema_version: String,
    pub invocation: Value,
    pub config: Value,
    pub dataset_or_scenario: Value,
    pub methods: Vec<MethodEntry>,
    pub better_flag: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_used: Option<Vec<f64>>,
}

/// Protocol facts of a report, merged into the config echo.
fn protocol_echo(report: &BenchmarkReport) -> Value {
    serde_json::json!({
        "task": report.task,
        "replications": report.replications,
        "seed": report.seed,
        "protocol": report.protocol,
        "split_fraction": report.split_fraction,
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Value::Object(b), Value::Object(e)) = (&mut base, extra) {
        b.extend(e);
    }
    base
}

impl ResultsDocument {
    pub fn from_report(report: &BenchmarkReport, invocation: Value, config: Value) -> Self {
        ResultsDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            invocation,
            config: merge(config, protocol_echo(report)),
            dataset_or_scenario: report.source.clone(),
            methods: report
                .methods
                .iter()
                .map(|m| MethodEntry {
                    id: m.id.clone(),
                    mean: m.mean,
                    std: m.std,
                    losses: m.losses.clone(),
                    rho: None,
                })
                .collect(),
            better_flag: report.better_flag,
            weights_used: report.weights_used.clone(),
        }
    }

    /// One entry per (level, method). The flag holds only if it holds at
    /// every level; it is null when any level lacks it.
    pub fn from_sweep(
        base: &ScenarioConfig,
        sweep: &[(f64, BenchmarkReport)],
        invocation: Value,
        config: Value,
    ) -> Result<Self> {
        let first = sweep
            .first()
            .map(|(_, r)| r)
            .ok_or_else(|| Error::config("empty sweep"))?;
        let rhos: Vec<f64> = sweep.iter().map(|(rho, _)| *rho).collect();
        let mut source = first.source.clone();
        if let Value::Object(map) = &mut source {
            map.insert("rho".into(), serde_json::json!(rhos));
            map.insert("id".into(), Value::String(format!("{}_sweep", base.id())));
        }
        let level_seeds: Vec<u64> = sweep.iter().map(|(_, r)| r.seed).collect();
        let mut echo = protocol_echo(first);
        if let Value::Object(map) = &mut echo {
            map.insert("seed".into(), serde_json::json!(level_seeds));
        }
        let better_flag = sweep
            .iter()
            .map(|(_, r)| r.better_flag)
            .collect::<Option<Vec<bool>>>()
            .map(|flags| flags.into_iter().all(|f| f));
        Ok(ResultsDocument {
            schema_version: SCHEMA_VERSION.to_string(),
            invocation,
            config: merge(config, echo),
            dataset_or_scenario: source,
            methods: sweep
                .iter()
                .flat_map(|(rho, r)| {
                    r.methods.iter().map(move |m| MethodEntry {
                        id: m.id.clone(),
                        mean: m.mean,
                        std: m.std,
                        losses: m.losses.clone(),
                        rho: Some(*rho),
                    })
                })
                .collect(),
            better_flag,
            weights_used: first.weights_used.clone(),
        })
    }

    /// Pretty JSON with sorted keys and a trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("document serializes");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }

    pub fn is_sweep(&self) -> bool {
        self.methods.iter().any(|m| m.rho.is_some())
    }

    /// Method ids in first-seen order.
    pub fn method_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = Vec::new();
        for m in &self.methods {
            if !ids.contains(&m.id.as_str()) {
                ids.push(&m.id);
            }
        }
        ids
    }

    pub fn task(&self) -> Option<Task> {
        self.config
            .get("task")
            .or_else(|| self.dataset_or_scenario.get("task"))
            .and_then(|t| t.as_str())
            .and_then(|t| t.parse().ok())
    }
}

pub fn parse_results(text: &str) -> Result<ResultsDocument> {
    let doc: ResultsDocument = serde_json::from_str(text)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::data(format!(
            "unsupported results schema_version '{}'",
            doc.schema_version
        )));
    }
    if doc.methods.is_empty() {
        return Err(Error::data("results document lists no methods"));
    }
    for m in &doc.methods {
        if m.losses.is_empty() {
            return Err(Error::data(format!("method {} has no losses", m.id)));
        }
        let values = m
            .losses
            .iter()
            .chain([&m.mean, &m.std])
            .chain(m.rho.as_ref());
        if values.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "method {} has non-finite values",
                m.id
            )));
        }
    }
    Ok(doc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Text,
    Markdown,
    Csv,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" | "txt" => Ok(TableFormat::Text),
            "md" | "markdown" => Ok(TableFormat::Markdown),
            "csv" => Ok(TableFormat::Csv),
            other => Err(Error::config(format!(
                "unknown format '{other}' (text, md, csv)"
            ))),
        }
    }
}

/// Renders `mean±std` the way the comparison tables print losses.
pub fn format_loss(task: Task, mean: f64, std: f64) -> String {
    format!("{}±{}", format_value(task, mean), format_value(task, std))
}

fn format_value(task: Task, v: f64) -> String {
    if v.abs() >= 1e4 {
        let s = format!("{v:.1e}");
        return s.replace('e', "E");
    }
    match task {
        Task::Regression => format!("{v:.2}"),
        Task::Classification => format!("{v:.3}"),
    }
}

/// One line of a scenario comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub weighting: Scheme,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    /// Single base learner, uniform RSSL, adaptive RSSL, forest.
    pub cells: [Option<(f64, f64)>; 4],
    pub better: Option<bool>,
}

/// Rows for `schemes`, scheme-major, scenarios in the given order.
pub fn comparison_rows(
    results: &[(ScenarioConfig, BenchmarkReport)],
    schemes: &[Scheme],
) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for &scheme in schemes {
        for (scenario, report) in results {
            let cell = |id: MethodId| report.method(id.as_str()).map(|m| (m.mean, m.std));
            let adaptive = cell(MethodId::for_scheme(scheme));
            let forest = cell(MethodId::RandomForest);
            rows.push(ComparisonRow {
                weighting: scheme,
                n: scenario.n,
                p: scenario.p,
                rho: scenario.rho,
                cells: [
                    cell(MethodId::SingleBase),
                    cell(MethodId::UniformRssl),
                    adaptive,
                    forest,
                ],
                better: adaptive.zip(forest).map(|(a, f)| a.0 < f.0),
            });
        }
    }
    rows
}

fn scheme_label(s: Scheme) -> &'static str {
    match s {
        Scheme::Uniform => "UNIFORM",
        Scheme::Correlation => "CORRELATION",
        Scheme::FStatistic => "F-STATISTICS",
    }
}

pub fn comparison_header(task: Task) -> [&'static str; 9] {
    match task {
        Task::Regression => [
            "WEIGHTING",
            "N",
            "P",
            "ρ",
            "MLR",
            "UNIFORM MLR",
            "ADAPTIVE MLR",
            "RF",
            "BETTER?",
        ],
        Task::Classification => [
            "WEIGHTING",
            "N",
            "P",
            "ρ",
            "GLM",
            "UNI. GLM",
            "ADAP. GLM",
            "RF",
            "BETTER?",
        ],
    }
}

/// The comparison table; the weighting label appears on the first row of
/// each scheme block only.
pub fn render_comparison(task: Task, rows: &[ComparisonRow], format: TableFormat) -> String {
    let header: Vec<String> = comparison_header(task)
        .iter()
        .map(|s| s.to_string())
        .collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let first = i == 0 || rows[i - 1].weighting != r.weighting;
            let mut line = vec![
                if first || format == TableFormat::Csv {
                    scheme_label(r.weighting).to_string()
                } else {
                    String::new()
                },
                r.n.to_string(),
                r.p.to_string(),
                r.rho.to_string(),
            ];
            line.extend(r.cells.iter().map(|c| match c {
                Some((m, s)) => format_loss(task, *m, *s),
                None => "NA".to_string(),
            }));
            line.push(
                match r.better {
                    Some(true) => "✓",
                    Some(false) => "×",
                    None => "NA",
                }
                .to_string(),
            );
            line
        })
        .collect();
    render_table(&header, &body, format)
}

/// Per-method summary of a results document.
pub fn render_summary(doc: &ResultsDocument, format: TableFormat) -> String {
    let task = doc.task().unwrap_or(Task::Regression);
    let sweep = doc.is_sweep();
    let mut header: Vec<String> = Vec::new();
    if sweep {
        header.push("rho".into());
    }
    header.extend(["method", "mean", "std", "R"].map(String::from));
    let body: Vec<Vec<String>> = doc
        .methods
        .iter()
        .map(|m| {
            let mut line = Vec::new();
            if let Some(rho) = m.rho {
                line.push(rho.to_string());
            } else if sweep {
                line.push(String::new());
            }
            if format == TableFormat::Csv {
                line.extend([m.id.clone(), m.mean.to_string(), m.std.to_string()]);
            } else {
                line.extend([
                    m.id.clone(),
                    format_value(task, m.mean),
                    format_value(task, m.std),
                ]);
            }
            line.push(m.losses.len().to_string());
            line
        })
        .collect();
    let mut out = render_table(&header, &body, format);
    if format != TableFormat::Csv {
        let flag = match doc.better_flag {
            Some(true) => "✓",
            Some(false) => "×",
            None => "NA",
        };
        let _ = writeln!(out, "\nBETTER? {flag}");
    }
    out
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_table(header: &[String], body: &[Vec<String>], format: TableFormat) -> String {
    let mut out = String::new();
    match format {
        TableFormat::Csv => {
            for line in std::iter::once(header).chain(body.iter().map(|l| l.as_slice())) {
                let cells: Vec<String> = line.iter().map(|c| csv_cell(c)).collect();
                let _ = writeln!(out, "{}", cells.join(","));
            }
        }
        TableFormat::Markdown => {
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for line in body {
                let _ = writeln!(out, "| {} |", line.join(" | "));
            }
        }
        TableFormat::Text => {
            let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
            for line in body {
                for (w, c) in widths.iter_mut().zip(line) {
                    *w = (*w).max(c.chars().count());
                }
            }
            let pad = |line: &[String]| {
                let cells: Vec<String> = line
                    .iter()
                    .zip(&widths)
                    .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                    .collect();
                cells.join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "{}", pad(header));
            for line in body {
                let _ = writeln!(out, "{}", pad(line));
            }
        }
    }
    out
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

struct YAxis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl YAxis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> YAxis {
        let values: Vec<f64> = values.collect();
        let floor = values
            .iter()
            .copied()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let floor = if floor.is_finite() { floor } else { 1e-3 };
        let t = |v: f64| if log { v.max(floor).log10() } else { v };
        let mut lo = values.iter().map(|v| t(*v)).fold(f64::INFINITY, f64::min);
        let mut hi = values
            .iter()
            .map(|v| t(*v))
            .fold(f64::NEG_INFINITY, f64::max);
        if !log {
            lo = lo.min(0.0);
        }
        if hi - lo < 1e-12 {
            hi = lo + 1.0;
        }
        YAxis { lo, hi, log }
    }

    fn y(&self, v: f64) -> f64 {
        let t = if self.log {
            v.max(10f64.powf(self.lo)).log10()
        } else {
            v
        };
        let frac = (t - self.lo) / (self.hi - self.lo);
        HEIGHT - MARGIN_BOTTOM - frac * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }

    fn ticks(&self) -> Vec<f64> {
        (0..=4)
            .map(|i| {
                let t = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                if self.log {
                    10f64.powf(t)
                } else {
                    t
                }
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

/// Loss against rho for sweeps, otherwise one box per method. Each method
/// is one `<g class="series">` element.
pub fn render_svg(doc: &ResultsDocument, log_scale: bool) -> String {
    let ids = doc.method_ids();
    let loss_name = match doc.task() {
        Some(Task::Classification) => "MCR",
        _ => "MSE",
    };
    let all_losses = doc.methods.iter().flat_map(|m| m.losses.iter().copied());
    let sweep = doc.is_sweep();
    let axis = if sweep {
        YAxis::new(doc.methods.iter().map(|m| m.mean), log_scale)
    } else {
        YAxis::new(all_losses, log_scale)
    };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let x0 = MARGIN_LEFT;
    let ybase = HEIGHT - MARGIN_BOTTOM;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let scale = if log_scale { "log" } else { "linear" };
    let y_title = if log_scale {
        format!("{loss_name} (logarithmic scale)")
    } else {
        loss_name.to_string()
    };
    let _ = writeln!(s, r#"<g class="axis y" data-scale="{scale}">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{ybase}" stroke="black"/>"#
    );
    for t in axis.ticks() {
        let y = axis.y(t);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.1}" transform="rotate(-90 16 {:.1})" text-anchor="middle">{}</text>"#,
        (MARGIN_TOP + ybase) / 2.0,
        (MARGIN_TOP + ybase) / 2.0,
        y_title
    );
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g class="axis x">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{x0}" y1="{ybase}" x2="{:.1}" y2="{ybase}" stroke="black"/>"#,
        x0 + plot_w
    );

    if sweep {
        let mut rhos: Vec<f64> = doc.methods.iter().filter_map(|m| m.rho).collect();
        rhos.sort_by(f64::total_cmp);
        rhos.dedup();
        let (rlo, rhi) = (rhos[0], rhos[rhos.len() - 1]);
        let x = |rho: f64| {
            if rhi > rlo {
                x0 + 20.0 + (rho - rlo) / (rhi - rlo) * (plot_w - 40.0)
            } else {
                x0 + plot_w / 2.0
            }
        };
        for rho in &rhos {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{rho}</text>"#,
                x(*rho),
                ybase + 16.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">ρ</text>"#,
            x0 + plot_w / 2.0,
            ybase + 36.0
        );
        let _ = writeln!(s, "</g>");
        for (k, id) in ids.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let mut pts: Vec<(f64, f64)> = doc
                .methods
                .iter()
                .filter(|m| m.id == *id)
                .filter_map(|m| m.rho.map(|r| (r, m.mean)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let _ = writeln!(s, r#"<g class="series" data-method="{}">"#, escape(id));
            let path: Vec<String> = pts
                .iter()
                .map(|(r, m)| format!("{:.1},{:.1}", x(*r), axis.y(*m)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
                path.join(" ")
            );
            for (r, m) in &pts {
                let _ = writeln!(
                    s,
                    r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{colour}"/>"#,
                    x(*r),
                    axis.y(*m)
                );
            }
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" fill="{colour}">{}</text>"#,
                x0 + plot_w - 110.0,
                MARGIN_TOP + 14.0 * k as f64,
                escape(id)
            );
            let _ = writeln!(s, "</g>");
        }
    } else {
        let slot = plot_w / ids.len() as f64;
        for (k, id) in ids.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x0 + slot * (k as f64 + 0.5),
                ybase + 16.0,
                escape(id)
            );
        }
        let _ = writeln!(s, "</g>");
        for (k, id) in ids.iter().enumerate() {
            let colour = PALETTE[k % PALETTE.len()];
            let mut losses: Vec<f64> = doc
                .methods
                .iter()
                .filter(|m| m.id == *id)
                .flat_map(|m| m.losses.iter().copied())
                .collect();
            losses.sort_by(f64::total_cmp);
            let [lo, q1, med, q3, hi] =
                [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| axis.y(quantile(&losses, q)));
            let cx = x0 + slot * (k as f64 + 0.5);
            let half = (slot * 0.25).min(30.0);
            let _ = writeln!(s, r#"<g class="series" data-method="{}">"#, escape(id));
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" y1="{lo:.1}" x2="{cx:.1}" y2="{hi:.1}" stroke="{colour}"/>"#
            );
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{q3:.1}" width="{:.1}" height="{:.1}" fill="white" stroke="{colour}"/>"#,
                cx - half,
                2.0 * half,
                (q1 - q3).max(0.0)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.1}" y1="{med:.1}" x2="{:.1}" y2="{med:.1}" stroke="{colour}" stroke-width="2"/>"#,
                cx - half,
                cx + half
            );
            let _ = writeln!(s, "</g>");
        }
    }
    let _ = writeln!(s, "</svg>");
    s
}
