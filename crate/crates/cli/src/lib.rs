//! Command-line front end: scenario ingestion, single runs, sweeps over
//! demand or point count, and bias fitting against a joint solution.

pub mod output;
pub mod scenario;
pub mod strategy;

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hetnet::baselines::{fit_biases, fixed_assoc_minimize, re_associate, BiasFitConfig, RsrpTable};
use hetnet::netmodel::build_rate_table;
use hetnet::oracle::{exhaustive_min_power, EXHAUSTIVE_CELL_LIMIT};
use rayon::prelude::*;

use crate::output::{
    read_json, sort_rows, write_json, write_sweep, BiasBundle, OracleCheck, RerunCheck, RunBundle, SweepRow,
    BIAS_FILE, REPORT_FILE, SWEEP_FILE,
};
use crate::scenario::{realize, Instance, Overrides, ScenarioFile};
use crate::strategy::{run_strategy, Strategy};

/// Exit status for demands above the network's capacity.
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Parser)]
#[command(name = "hetnet", version, about = "Energy-optimal activation and resource allocation for heterogeneous networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one scenario with one strategy and write report.json.
    Run(RunArgs),
    /// Solve a grid of demands or point counts over several seeds and
    /// strategies and write sweep.csv.
    Sweep(SweepArgs),
    /// Fit cell biases that reproduce a joint solution's association and
    /// write bias.json.
    FitBias(FitBiasArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Leave wall-clock times out of the outputs.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value = "joint")]
    pub strategy: Strategy,
    /// Seed override; defaults to the scenario's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Per-point demand override (bit/s).
    #[arg(long)]
    pub demand: Option<f64>,
    /// Cross-check against the exhaustive activation optimum (small
    /// networks only).
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Repeat for several strategies.
    #[arg(long = "strategy", default_value = "joint")]
    pub strategies: Vec<Strategy>,
    /// Per-point demand grid `lo:hi:steps` (bit/s, inclusive, linear).
    #[arg(long)]
    pub sweep_demands: Option<String>,
    /// Comma-separated test-point counts.
    #[arg(long, value_delimiter = ',')]
    pub sweep_points: Vec<usize>,
    /// Number of seeds, starting at the scenario's seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
}

#[derive(Debug, Args)]
pub struct FitBiasArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// report.json of a joint run on the same scenario.
    #[arg(long)]
    pub joint: PathBuf,
    /// Re-solve with the fitted association and report the gap.
    #[arg(long)]
    pub rerun: bool,
}

/// Parse `lo:hi:steps` into `steps` evenly spaced values.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        bail!("grid {spec:?} must look like lo:hi:steps");
    };
    let lo: f64 = lo.trim().parse().with_context(|| format!("grid lower bound in {spec:?}"))?;
    let hi: f64 = hi.trim().parse().with_context(|| format!("grid upper bound in {spec:?}"))?;
    let steps: usize = steps.trim().parse().with_context(|| format!("grid step count in {spec:?}"))?;
    if steps == 0 || !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || hi < lo {
        bail!("grid {spec:?} needs 0 <= lo <= hi and steps >= 1");
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps).map(|j| lo + (hi - lo) * j as f64 / (steps - 1) as f64).collect())
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn mean_demand(inst: &Instance) -> f64 {
    let d = inst.demand.demands();
    if d.is_empty() {
        0.0
    } else {
        d.iter().sum::<f64>() / d.len() as f64
    }
}

pub fn oracle_check(inst: &Instance, run: &strategy::StrategyRun) -> Result<OracleCheck> {
    let topo = &inst.scenario.topology;
    if topo.len() > EXHAUSTIVE_CELL_LIMIT {
        bail!("--oracle supports at most {EXHAUSTIVE_CELL_LIMIT} cells, scenario has {}", topo.len());
    }
    let best = exhaustive_min_power(topo, &run.rates, &inst.demand, &run.patterns)?;
    let p = run.report.p_tot_w;
    let relative_gap = if best.p_tot_w > 0.0 { (p - best.p_tot_w) / best.p_tot_w } else { 0.0 };
    Ok(OracleCheck { p_tot_w: best.p_tot_w, active_cells: best.active, relative_gap })
}

/// `run` subcommand; returns the process exit code.
pub fn cmd_run(args: &RunArgs) -> Result<i32> {
    let file = ScenarioFile::load(&args.common.scenario)?;
    let seed = args.seed.unwrap_or(file.seed);
    let inst = realize(&file, seed, Overrides { demand_bps: args.demand, points: None })?;
    let start = Instant::now();
    let run = run_strategy(&args.strategy, &inst)?;
    let wall = elapsed_ms(start);
    let oracle = if args.oracle { Some(oracle_check(&inst, &run)?) } else { None };
    let feasible = run.report.feasible;
    let bundle = RunBundle {
        scenario_id: inst.id.clone(),
        seed,
        strategy: args.strategy.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        demand_bps: args.demand,
        cells: inst.scenario.topology.len(),
        points: inst.demand.len(),
        patterns: run.patterns,
        report: run.report,
        oracle,
        wall_ms: (!args.common.no_timing).then_some(wall),
    };
    std::fs::create_dir_all(&args.common.out)?;
    write_json(&args.common.out.join(REPORT_FILE), &bundle)?;
    Ok(if feasible { 0 } else { EXIT_INFEASIBLE })
}

/// One sweep job: a realized instance and the strategies to run on it.
fn sweep_rows(file: &ScenarioFile, seed: u64, ov: Overrides, strategies: &[Strategy], timing: bool) -> Vec<SweepRow> {
    let inst = realize(file, seed, ov);
    strategies
        .iter()
        .map(|s| {
            let base = |inst: Option<&Instance>| SweepRow {
                scenario_id: file.scenario_id(),
                seed,
                strategy: s.to_string(),
                demand_bps: inst.map(mean_demand).or(ov.demand_bps).unwrap_or(0.0),
                k: inst.map(|i| i.demand.len()).or(ov.points).unwrap_or(0),
                p_tot_w: None,
                n_active_cells: None,
                n_active_patterns: None,
                avg_serving_cells: None,
                feasible: "error".to_string(),
                outer_iters: None,
                wall_ms: None,
            };
            let inst = match &inst {
                Ok(i) => i,
                Err(e) => {
                    eprintln!("seed {seed}: {e:#}");
                    return base(None);
                }
            };
            let start = Instant::now();
            match run_strategy(s, inst) {
                Ok(run) => {
                    let r = run.report;
                    SweepRow {
                        p_tot_w: Some(r.p_tot_w),
                        n_active_cells: Some(r.active_cells.len()),
                        n_active_patterns: Some(r.active_patterns),
                        avg_serving_cells: Some(r.avg_serving_cells),
                        feasible: r.feasible.to_string(),
                        outer_iters: Some(r.outer_iters),
                        wall_ms: timing.then(|| elapsed_ms(start)),
                        ..base(Some(inst))
                    }
                }
                Err(e) => {
                    eprintln!("seed {seed}, strategy {s}: {e:#}");
                    base(Some(inst))
                }
            }
        })
        .collect()
}

/// Run every (seed, grid value, strategy) combination; rows come back
/// sorted.
pub fn sweep(
    file: &ScenarioFile,
    strategies: &[Strategy],
    demands: &[f64],
    point_counts: &[usize],
    seeds: u64,
    timing: bool,
) -> Vec<SweepRow> {
    let demand_axis: Vec<Option<f64>> =
        if demands.is_empty() { vec![None] } else { demands.iter().copied().map(Some).collect() };
    let point_axis: Vec<Option<usize>> =
        if point_counts.is_empty() { vec![None] } else { point_counts.iter().copied().map(Some).collect() };
    let mut jobs = Vec::new();
    for s in 0..seeds {
        for &points in &point_axis {
            for &demand_bps in &demand_axis {
                jobs.push((file.seed.wrapping_add(s), Overrides { demand_bps, points }));
            }
        }
    }
    let mut rows: Vec<SweepRow> =
        jobs.par_iter().flat_map_iter(|&(seed, ov)| sweep_rows(file, seed, ov, strategies, timing)).collect();
    sort_rows(&mut rows);
    rows
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let file = ScenarioFile::load(&args.common.scenario)?;
    if args.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let demands = match &args.sweep_demands {
        Some(spec) => parse_grid(spec)?,
        None => Vec::new(),
    };
    let rows = sweep(&file, &args.strategies, &demands, &args.sweep_points, args.seeds, !args.common.no_timing);
    std::fs::create_dir_all(&args.common.out)?;
    write_sweep(&args.common.out.join(SWEEP_FILE), &rows)?;
    Ok(0)
}

pub fn cmd_fit_bias(args: &FitBiasArgs) -> Result<i32> {
    let file = ScenarioFile::load(&args.common.scenario)?;
    let joint: RunBundle = read_json(&args.joint)?;
    let inst = realize(&file, joint.seed, Overrides { demand_bps: joint.demand_bps, points: None })?;
    let (k, b) = (inst.demand.len(), inst.scenario.topology.len());
    let report = &joint.report;
    if !report.feasible || report.association.len() != k || report.association.iter().any(|r| r.len() != b) {
        bail!("{} carries no association for this scenario ({k} points, {b} cells)", args.joint.display());
    }
    report
        .allocation
        .validate(k, b, joint.patterns.len())
        .map_err(|e| anyhow!("joint allocation fails validation: {e}"))?;
    let cfg = inst.bias_fit.clone().unwrap_or_else(|| BiasFitConfig::for_topology(&inst.scenario.topology));
    let rsrp = RsrpTable::from_gains(&inst.scenario.topology, &inst.scenario.gains)?;
    let fit = fit_biases(&report.association, &rsrp, &cfg)?;
    let single_association = report
        .association
        .iter()
        .zip(inst.demand.demands())
        .all(|(row, &d)| d == 0.0 || row.iter().map(|&s| s as usize).sum::<usize>() == 1);
    let rerun = if args.rerun {
        let assoc = re_associate(&rsrp, &fit.eta)?;
        let rates = build_rate_table(&inst.scenario.topology, &inst.scenario.gains, &inst.radio, &joint.patterns)?;
        let fixed = fixed_assoc_minimize(&inst.scenario.topology, &rates, &assoc, &inst.demand, &inst.solver)?;
        let relative_gap =
            if report.p_tot_w > 0.0 { (fixed.p_tot_w - report.p_tot_w) / report.p_tot_w } else { 0.0 };
        Some(RerunCheck { feasible: fixed.feasible, p_tot_w: fixed.p_tot_w, joint_p_tot_w: report.p_tot_w, relative_gap })
    } else {
        None
    };
    let bundle = BiasBundle {
        scenario_id: inst.id.clone(),
        seed: joint.seed,
        eta_db: fit.eta.values().to_vec(),
        error: fit.error,
        mismatch_fraction: fit.mismatch_fraction,
        single_association,
        rerun,
    };
    std::fs::create_dir_all(&args.common.out)?;
    write_json(&args.common.out.join(BIAS_FILE), &bundle)?;
    Ok(0)
}

/// Dispatch a parsed command line; errors map to exit code 1.
pub fn execute(cli: &Cli) -> i32 {
    let res = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::FitBias(a) => cmd_fit_bias(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}
