//! Strategy pipelines: joint optimization over a pattern set and the
//! baseline schemes it is compared against.

use std::fmt;
use std::str::FromStr;

use anyhow::{anyhow, bail, Result};
use hetnet::baselines::{fixed_assoc_minimize, re_associate, BiasVector, RsrpTable};
use hetnet::energymin::minimize_energy;
use hetnet::netmodel::{build_rate_table, CellKind};
use hetnet::patterns::{feature_patterns, reuse1, PatternSet, Provenance};
use hetnet::{RateTable, SolveReport};

use crate::scenario::{tier_clusters, Instance};

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Joint optimization over the scenario's pattern set.
    Joint,
    /// All-on pattern only.
    Reuse1,
    /// Biased max-RSRP association, then energy minimization over the
    /// scenario's pattern set with that association fixed.
    FixedRe(BiasSpec),
    Feature,
    Clusters,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BiasSpec {
    /// Same bias (dB) on every pico, none on macros.
    Pico(f64),
    /// One bias (dB) per cell.
    PerCell(Vec<f64>),
}

impl FromStr for Strategy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint" => Ok(Strategy::Joint),
            "reuse1" => Ok(Strategy::Reuse1),
            "feature" => Ok(Strategy::Feature),
            "clusters" => Ok(Strategy::Clusters),
            _ => {
                let spec = s
                    .strip_prefix("fixed-re:")
                    .ok_or_else(|| anyhow!("unknown strategy {s:?}; expected joint, reuse1, feature, clusters or fixed-re:<bias>"))?;
                let values = spec
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("bad bias {v:?} in {s:?}: {e}")))
                    .collect::<Result<Vec<f64>>>()?;
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    bail!("biases must be finite and >= 0 in {s:?}");
                }
                Ok(Strategy::FixedRe(match values.as_slice() {
                    [one] => BiasSpec::Pico(*one),
                    _ => BiasSpec::PerCell(values),
                }))
            }
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Joint => f.write_str("joint"),
            Strategy::Reuse1 => f.write_str("reuse1"),
            Strategy::Feature => f.write_str("feature"),
            Strategy::Clusters => f.write_str("clusters"),
            Strategy::FixedRe(BiasSpec::Pico(v)) => write!(f, "fixed-re:{v}"),
            Strategy::FixedRe(BiasSpec::PerCell(v)) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "fixed-re:{}", parts.join(","))
            }
        }
    }
}

impl BiasSpec {
    pub fn to_vector(&self, inst: &Instance) -> Result<BiasVector> {
        let cells = inst.scenario.topology.cells();
        let eta = match self {
            BiasSpec::Pico(v) => cells.iter().map(|c| if c.kind == CellKind::Pico { *v } else { 0.0 }).collect(),
            BiasSpec::PerCell(v) => {
                if v.len() != cells.len() {
                    bail!("bias list has {} entries for {} cells", v.len(), cells.len());
                }
                v.clone()
            }
        };
        Ok(BiasVector::new(eta)?)
    }
}

/// Outcome of one strategy on one instance, with the inputs the solver saw.
#[derive(Debug, Clone)]
pub struct StrategyRun {
    pub report: SolveReport,
    pub patterns: PatternSet,
    pub rates: RateTable,
}

/// Candidate pattern set used by a strategy.
pub fn strategy_patterns(strategy: &Strategy, inst: &Instance) -> Result<PatternSet> {
    let topo = &inst.scenario.topology;
    Ok(match strategy {
        Strategy::Joint | Strategy::FixedRe(_) => inst.patterns.clone(),
        Strategy::Reuse1 => reuse1(topo.len())?,
        Strategy::Feature => feature_patterns(topo)?,
        // A cluster map given in the scenario takes precedence over the
        // per-site default.
        Strategy::Clusters if inst.patterns.provenance() == Provenance::Cluster => inst.patterns.clone(),
        Strategy::Clusters => tier_clusters(topo)?,
    })
}

pub fn run_strategy(strategy: &Strategy, inst: &Instance) -> Result<StrategyRun> {
    let topo = &inst.scenario.topology;
    let patterns = strategy_patterns(strategy, inst)?;
    let rates = build_rate_table(topo, &inst.scenario.gains, &inst.radio, &patterns)?;
    let report = match strategy {
        Strategy::FixedRe(spec) => {
            let eta = spec.to_vector(inst)?;
            let rsrp = RsrpTable::from_gains(topo, &inst.scenario.gains)?;
            let assoc = re_associate(&rsrp, &eta)?;
            fixed_assoc_minimize(topo, &rates, &assoc, &inst.demand, &inst.solver)?
        }
        _ => minimize_energy(topo, &rates, &inst.demand, &inst.solver)?,
    };
    Ok(StrategyRun { report, patterns, rates })
}
