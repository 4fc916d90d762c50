//! Result files: per-run JSON bundles and the sweep CSV.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use hetnet::patterns::PatternSet;
use hetnet::SolveReport;
use serde::{Deserialize, Serialize};

pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const BIAS_FILE: &str = "bias.json";

/// Column order of the sweep CSV.
pub const SWEEP_COLUMNS: [&str; 12] = [
    "scenario_id",
    "seed",
    "strategy",
    "demand_bps",
    "K",
    "P_tot_W",
    "n_active_cells",
    "n_active_patterns",
    "avg_serving_cells",
    "feasible",
    "outer_iters",
    "wall_ms",
];

const SWEEP_UNITS: &str =
    "# units: demand_bps = bit/s per test point (mean), P_tot_W = W, wall_ms = ms; feasible is true, false or error";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub p_tot_w: f64,
    pub active_cells: Vec<usize>,
    /// `(P_tot − P_oracle) / P_oracle`; zero when both are zero.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBundle {
    pub scenario_id: String,
    pub seed: u64,
    pub strategy: String,
    pub version: String,
    /// Per-point demand override used for this run, if any.
    pub demand_bps: Option<f64>,
    pub cells: usize,
    pub points: usize,
    pub patterns: PatternSet,
    pub report: SolveReport,
    pub oracle: Option<OracleCheck>,
    /// Omitted when timing is disabled so that reruns are byte-identical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RerunCheck {
    pub feasible: bool,
    pub p_tot_w: f64,
    pub joint_p_tot_w: f64,
    /// `(P_fixed − P_joint) / P_joint`.
    pub relative_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasBundle {
    pub scenario_id: String,
    pub seed: u64,
    pub eta_db: Vec<f64>,
    pub error: f64,
    pub mismatch_fraction: f64,
    /// Every positive-demand point of the reference is served by one cell.
    pub single_association: bool,
    pub rerun: Option<RerunCheck>,
}

/// One sweep row; numeric fields are empty when the run failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scenario_id: String,
    pub seed: u64,
    pub strategy: String,
    pub demand_bps: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "P_tot_W")]
    pub p_tot_w: Option<f64>,
    pub n_active_cells: Option<usize>,
    pub n_active_patterns: Option<usize>,
    pub avg_serving_cells: Option<f64>,
    pub feasible: String,
    pub outer_iters: Option<usize>,
    pub wall_ms: Option<f64>,
}

impl SweepRow {
    fn key(&self) -> (&str, &str, u64, usize, f64) {
        (&self.scenario_id, &self.strategy, self.seed, self.k, self.demand_bps)
    }
}

/// Sort rows by (scenario, strategy, seed, K, demand).
pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(|a, b| {
        let (ka, kb) = (a.key(), b.key());
        ka.0.cmp(kb.0)
            .then(ka.1.cmp(kb.1))
            .then(ka.2.cmp(&kb.2))
            .then(ka.3.cmp(&kb.3))
            .then(ka.4.total_cmp(&kb.4))
    });
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(file, "{SWEEP_UNITS}")?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<Vec<SweepRow>, _>>()?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))
}
