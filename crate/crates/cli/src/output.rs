//! Report files. CSV floats use `{:.16e}` (17 significant digits) and carry
//! no timing, so reruns with the same configuration are byte-identical.
//!
//! * `summary.csv`: one aggregate row.
//! * `reps.csv`: one row per repetition, common fields then extras.
//! * `ess_trace.csv`: `rep,step,ess` for every recorded step.
//! * `report.json`: configuration, hash, rows (with wall time) and aggregate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smcprice_core::report::{Aggregate, RepRow};

use crate::config::{canonical, Config};
use crate::error::{CliError, CliResult};
use crate::experiment::ExperimentOutput;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: String,
    pub experiment: String,
    pub method: String,
    pub particles: usize,
    /// Canonical TOML of the configuration that produced the run.
    pub config: String,
    pub config_sha256: String,
    pub seed: u64,
    pub reference: Option<f64>,
    pub median_resamples: f64,
    pub extra_columns: Vec<String>,
    pub extras: Vec<Vec<Option<f64>>>,
    pub rows: Vec<RepRow>,
    pub ess_traces: Vec<Vec<f64>>,
    pub aggregate: AggregateJson,
    pub wall_ms: f64,
    pub threads: usize,
}

/// Aggregate with undefined values (a single repetition has no spread) as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateJson {
    pub mean: Option<f64>,
    pub two_sd: Option<f64>,
    pub variance: Option<f64>,
    pub mean_ess_final: Option<f64>,
    pub reps: usize,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&Aggregate> for AggregateJson {
    fn from(a: &Aggregate) -> Self {
        Self {
            mean: finite(a.mean),
            two_sd: finite(a.two_sd),
            variance: finite(a.variance),
            mean_ess_final: finite(a.mean_ess_final),
            reps: a.reps,
        }
    }
}

impl ReportFile {
    pub fn estimates(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.estimate).collect()
    }
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn build_report(cfg: &Config, seed: u64, out: &ExperimentOutput, wall_ms: f64) -> CliResult<ReportFile> {
    let config = canonical(cfg)?;
    Ok(ReportFile {
        version: VERSION.to_string(),
        experiment: out.experiment.to_string(),
        method: out.method.to_string(),
        particles: out.particles,
        config_sha256: sha256_hex(&config),
        config,
        seed,
        reference: out.reference,
        median_resamples: out.median_resamples(),
        extra_columns: out.extras.columns.iter().map(|c| c.to_string()).collect(),
        extras: out
            .extras
            .values
            .iter()
            .map(|row| row.iter().map(|&v| finite(v)).collect())
            .collect(),
        rows: out.report.rows.clone(),
        ess_traces: out.report.ess_traces.clone(),
        aggregate: (&out.report.aggregate).into(),
        wall_ms,
        threads: rayon::current_num_threads(),
    })
}

pub fn write_all(dir: &Path, out: &ExperimentOutput, report: &ReportFile) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    let agg = &out.report.aggregate;

    let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
    w.write_record([
        "experiment",
        "method",
        "particles",
        "reps",
        "mean",
        "two_sd",
        "variance",
        "mean_ess_final",
        "median_resamples",
        "reference",
    ])?;
    w.write_record([
        out.experiment.to_string(),
        out.method.to_string(),
        out.particles.to_string(),
        agg.reps.to_string(),
        fmt_f64(agg.mean),
        fmt_f64(agg.two_sd),
        fmt_f64(agg.variance),
        fmt_f64(agg.mean_ess_final),
        fmt_f64(out.median_resamples()),
        out.reference.map(fmt_f64).unwrap_or_default(),
    ])?;
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("reps.csv"))?;
    let mut header = vec!["rep", "seed", "estimate", "ess_final", "resample_epochs"];
    header.extend(out.extras.columns.iter().copied());
    w.write_record(&header)?;
    for (row, extra) in out.report.rows.iter().zip(&out.extras.values) {
        let mut rec = vec![
            row.rep.to_string(),
            row.seed.to_string(),
            fmt_f64(row.estimate),
            fmt_f64(row.ess_final),
            row.resample_epochs.to_string(),
        ];
        rec.extend(extra.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("ess_trace.csv"))?;
    w.write_record(["rep", "step", "ess"])?;
    for (rep, trace) in out.report.ess_traces.iter().enumerate() {
        for (step, ess) in trace.iter().enumerate() {
            w.write_record([rep.to_string(), step.to_string(), fmt_f64(*ess)])?;
        }
    }
    w.flush()?;

    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    Ok(())
}

/// Reads `report.json` from a file path or an output directory.
pub fn read_report(path: &Path) -> CliResult<ReportFile> {
    let file = if path.is_dir() {
        path.join("report.json")
    } else {
        path.to_path_buf()
    };
    let text =
        fs::read_to_string(&file).map_err(|e| CliError::Config(format!("cannot read {}: {e}", file.display())))?;
    Ok(serde_json::from_str(&text)?)
}
