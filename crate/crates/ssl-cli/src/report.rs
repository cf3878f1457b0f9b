//! Artifact writers. Every run emits three files into its output directory:
//!
//! * `run.csv` — long-format rows `step,statistic,value,method`, so plotting
//!   needs no schema knowledge. `statistic` names the quantity (dimensionless
//!   unless the name says otherwise); `method` tags how it was computed
//!   (`closed_form`, `recursion`, `quadrature`, `monte_carlo`, `histogram`,
//!   `exact_chain`, `config`).
//! * `summary.txt` — the human-readable report.
//! * `manifest.txt` — the full config, seed, and timestamp. Timestamps live
//!   only here, so `run.csv` is byte-identical across reruns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::config::ExperimentConfig;

pub const METHOD_CLOSED_FORM: &str = "closed_form";
pub const METHOD_RECURSION: &str = "recursion";
pub const METHOD_QUADRATURE: &str = "quadrature";
pub const METHOD_MONTE_CARLO: &str = "monte_carlo";
pub const METHOD_HISTOGRAM: &str = "histogram";
pub const METHOD_EXACT_CHAIN: &str = "exact_chain";
pub const METHOD_CONFIG: &str = "config";

/// Decimal rendering used in every CSV: shortest round-trip form, `.`
/// separator always, so output is locale-independent and byte-stable.
pub fn fmt_value(v: f64) -> String {
    format!("{v}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub step: usize,
    pub statistic: String,
    pub value: f64,
    pub method: &'static str,
}

/// Long-format result table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    rows: Vec<Row>,
}

impl Table {
    pub fn new() -> Self {
        Table::default()
    }

    pub fn push(&mut self, step: usize, statistic: impl Into<String>, value: f64, method: &'static str) {
        self.rows.push(Row { step, statistic: statistic.into(), value, method });
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,statistic,value,method\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.step, r.statistic, fmt_value(r.value), r.method);
        }
        out
    }
}

/// Everything one experiment produces.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub table: Table,
    pub summary: String,
    /// Assertion failures: a bound an experiment checks was violated.
    pub violations: Vec<String>,
    /// Chains that left the finite domain and were frozen.
    pub diverged: usize,
}

impl Artifacts {
    pub fn note_violation(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }
}

/// Writes `run.csv`, `summary.txt`, and `manifest.txt` under `dir`.
pub fn write_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    artifacts: &Artifacts,
) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join("run.csv");
    std::fs::write(&csv_path, artifacts.table.to_csv())?;

    let mut summary = artifacts.summary.clone();
    if !summary.ends_with('\n') && !summary.is_empty() {
        summary.push('\n');
    }
    for v in &artifacts.violations {
        let _ = writeln!(summary, "VIOLATION: {v}");
    }
    if artifacts.diverged > 0 {
        let _ = writeln!(summary, "DIVERGED: {} chains froze at non-finite states", artifacts.diverged);
    }
    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, summary)?;

    let manifest_path = dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest(config))?;
    Ok(vec![csv_path, summary_path, manifest_path])
}

pub fn manifest(config: &ExperimentConfig) -> String {
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!(
        "# {} v{}\n# written_unix_s = {stamp}\n# seed = {}\n\n{}",
        env!("CARGO_PKG_NAME"),
        env!("CARGO_PKG_VERSION"),
        config.seed,
        config.to_toml(),
    )
}
