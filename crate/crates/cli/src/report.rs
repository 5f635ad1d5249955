//! Report types and their JSON/CSV serialization.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use htl_core::{MetricReport, MonteCarloEstimate, RateFit};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Failed,
}

/// One method on one seed at one target size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub seed: u64,
    pub n_ta: usize,
    pub status: RowStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    /// `E[(f̂ − f_ta)²]` by Monte Carlo; synthetic experiments only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_risk: Option<MonteCarloEstimate>,
    /// Bandwidth or ridge parameter of the target-side fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparameter: Option<f64>,
    /// Auxiliary labels clipped to `±B`; transfer methods only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clipped_rows: Option<usize>,
}

impl MethodRow {
    pub fn failed(method: &str, seed: u64, n_ta: usize, error: String) -> Self {
        MethodRow {
            method: method.to_string(),
            seed,
            n_ta,
            status: RowStatus::Failed,
            error: Some(error),
            metrics: None,
            excess_risk: None,
            hyperparameter: None,
            clipped_rows: None,
        }
    }
}

/// Mean and sample standard deviation (`n − 1` denominator).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Absent for a single value.
    pub sd: Option<f64>,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.len() > 1)
            .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
        Some(Summary {
            mean,
            sd,
            count: values.len(),
        })
    }
}

/// Per-(method, n_ta) aggregate over the successful seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub method: String,
    pub n_ta: usize,
    pub n_failed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_squared: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excess_risk: Option<Summary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRate {
    pub method: String,
    pub fit: RateFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: usize,
    pub label: String,
    pub validation_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub seed: u64,
    pub n_ta: usize,
    pub chosen: String,
    pub chosen_index: usize,
    pub n_val: usize,
    pub candidates: Vec<CandidateScore>,
}

/// Methods × target sizes, each cell the MSE mean and standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub n_ta: Vec<usize>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub method: String,
    pub cells: Vec<Option<Summary>>,
}

/// One point of a plot-ready series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub series: String,
    pub method: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub toolkit: String,
    pub version: String,
    pub experiment_kind: ExperimentKind,
    pub config: ExperimentConfig,
    /// Resolved source-stage hyperparameter per seed.
    pub source_hyperparameters: Vec<(u64, Option<f64>)>,
    pub rows: Vec<MethodRow>,
    pub aggregates: Vec<Aggregate>,
    pub table: Table,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub rate_fits: Vec<MethodRate>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub selections: Vec<SelectionRecord>,
    #[serde(skip)]
    pub series: Vec<SeriesPoint>,
    pub failures: usize,
}

impl ExperimentReport {
    pub fn aggregate(&self, method: &str, n_ta: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.n_ta == n_ta)
    }

    pub fn rate(&self, method: &str) -> Option<&RateFit> {
        self.rate_fits.iter().find(|r| r.method == method).map(|r| &r.fit)
    }
}

/// Aggregates in first-appearance method order, then ascending `n_ta`.
pub fn aggregate_rows(rows: &[MethodRow]) -> Vec<Aggregate> {
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let sizes: BTreeSet<usize> = rows.iter().map(|r| r.n_ta).collect();
    let mut out = Vec::new();
    for m in methods {
        for &n in &sizes {
            let group: Vec<&MethodRow> = rows.iter().filter(|r| r.method == m && r.n_ta == n).collect();
            if group.is_empty() {
                continue;
            }
            let ok: Vec<&MethodRow> = group.iter().copied().filter(|r| r.status == RowStatus::Ok).collect();
            let collect = |f: &dyn Fn(&MethodRow) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|r| f(r)).collect() };
            out.push(Aggregate {
                method: m.to_string(),
                n_ta: n,
                n_failed: group.len() - ok.len(),
                mse: Summary::of(&collect(&|r| r.metrics.as_ref().map(|m| m.mse))),
                r_squared: Summary::of(&collect(&|r| r.metrics.as_ref().and_then(|m| m.r_squared))),
                excess_risk: Summary::of(&collect(&|r| r.excess_risk.map(|e| e.mean))),
            });
        }
    }
    out
}

pub fn build_table(aggregates: &[Aggregate]) -> Table {
    let sizes: Vec<usize> = aggregates.iter().map(|a| a.n_ta).collect::<BTreeSet<_>>().into_iter().collect();
    let mut rows: Vec<TableRow> = Vec::new();
    for a in aggregates {
        let col = sizes.iter().position(|&n| n == a.n_ta).expect("size collected");
        match rows.iter_mut().find(|r| r.method == a.method) {
            Some(r) => r.cells[col] = a.mse,
            None => {
                let mut cells = vec![None; sizes.len()];
                cells[col] = a.mse;
                rows.push(TableRow {
                    method: a.method.clone(),
                    cells,
                });
            }
        }
    }
    Table { n_ta: sizes, rows }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn rows_csv(rows: &[MethodRow]) -> String {
    let mut out = String::from(
        "method,seed,n_ta,status,mse,r_squared,ss_res,ss_tot,n_eval,excess_risk,excess_risk_se,hyperparameter,clipped_rows,error\n",
    );
    for r in rows {
        let m = r.metrics.as_ref();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.method),
            r.seed,
            r.n_ta,
            match r.status {
                RowStatus::Ok => "ok",
                RowStatus::Failed => "failed",
            },
            opt(m.map(|m| m.mse)),
            opt(m.and_then(|m| m.r_squared)),
            opt(m.map(|m| m.ss_res)),
            opt(m.map(|m| m.ss_tot)),
            m.map(|m| m.n_eval.to_string()).unwrap_or_default(),
            opt(r.excess_risk.map(|e| e.mean)),
            opt(r.excess_risk.map(|e| e.std_error)),
            opt(r.hyperparameter),
            r.clipped_rows.map(|c| c.to_string()).unwrap_or_default(),
            csv_field(r.error.as_deref().unwrap_or("")),
        );
    }
    out
}

pub fn series_csv(series: &[SeriesPoint]) -> String {
    let mut out = String::from("series,method,x,y\n");
    for p in series {
        let _ = writeln!(out, "{},{},{},{}", csv_field(&p.series), csv_field(&p.method), p.x, p.y);
    }
    out
}

pub fn table_csv(table: &Table) -> String {
    let mut out = String::from("method");
    for n in &table.n_ta {
        let _ = write!(out, ",mse_mean_n{n},mse_sd_n{n}");
    }
    out.push('\n');
    for row in &table.rows {
        out.push_str(&csv_field(&row.method));
        for c in &row.cells {
            let _ = write!(out, ",{},{}", opt(c.map(|s| s.mean)), opt(c.and_then(|s| s.sd)));
        }
        out.push('\n');
    }
    out
}

/// Write `report.json`, `rows.csv`, `series.csv` and `table.csv` into `dir`.
pub fn write_artifacts(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let json = serde_json::to_string_pretty(report).map_err(|e| CliError::Config(e.to_string()))?;
    let files = [
        ("report.json", json + "\n"),
        ("rows.csv", rows_csv(&report.rows)),
        ("series.csv", series_csv(&report.series)),
        ("table.csv", table_csv(&report.table)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
