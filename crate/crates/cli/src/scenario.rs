//! Scenario files: JSON description of a network, its test points, the
//! demand model, the candidate pattern set and solver settings.

use std::path::Path;

use anyhow::{bail, Context, Result};
use hetnet::baselines::BiasFitConfig;
use hetnet::netmodel::{
    demand_from_queue, draw_gains, drop_cells, drop_points, Cell, LayoutParams, MinDistances, Position,
    Scenario, TestPoint, TrafficModel,
};
use hetnet::patterns::{cluster_patterns, enumerate_all, feature_patterns, reuse1, ClusterMap, PatternSet, Provenance, TierLayout};
use hetnet::{DemandProfile, EnergyConfig, NetworkTopology, RadioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    /// Label written to every output row; defaults to the file stem.
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub radio: RadioConfig,
    pub cells: CellSource,
    pub points: PointSource,
    /// Overrides the per-point demands of explicit or generated points.
    #[serde(default)]
    pub demand: Option<DemandSpec>,
    #[serde(default)]
    pub patterns: PatternSpec,
    #[serde(default)]
    pub solver: EnergyConfig,
    #[serde(default)]
    pub bias_fit: Option<BiasFitConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CellSource {
    Explicit(Vec<Cell>),
    Generate(CellLayout),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellLayout {
    pub macros: usize,
    pub picos_per_macro: usize,
    #[serde(default = "default_isd")]
    pub isd_m: f64,
    #[serde(default)]
    pub min_distances: MinDistances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSource {
    Explicit(Vec<ExplicitPoint>),
    Generate(PointLayout),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPoint {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub demand_bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointLayout {
    pub count: usize,
    /// Points fall in discs of radius `isd_m / 2` around the macros.
    #[serde(default = "default_isd")]
    pub isd_m: f64,
    #[serde(default)]
    pub min_distances: MinDistances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandSpec {
    PerPointBps(f64),
    Traffic(TrafficModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSpec {
    #[default]
    All,
    Reuse1,
    Feature,
    /// Cells sharing a cluster id switch together.
    Clusters(Vec<usize>),
    Rows(Vec<Vec<u8>>),
}

fn default_isd() -> f64 {
    500.0
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut file: ScenarioFile =
            serde_json::from_str(&text).with_context(|| format!("invalid scenario {}", path.display()))?;
        if file.id.is_none() {
            file.id = path.file_stem().map(|s| s.to_string_lossy().into_owned());
        }
        file.validate()?;
        Ok(file)
    }

    pub fn validate(&self) -> Result<()> {
        self.radio.validate()?;
        self.solver.validate()?;
        match &self.demand {
            Some(DemandSpec::PerPointBps(d)) if !(d.is_finite() && *d >= 0.0) => {
                bail!("demand.per_point_bps must be finite and >= 0")
            }
            Some(DemandSpec::Traffic(tm)) => {
                demand_from_queue(tm)?;
            }
            _ => {}
        }
        if let PointSource::Explicit(points) = &self.points {
            if points.iter().any(|p| !(p.demand_bps.is_finite() && p.demand_bps >= 0.0)) {
                bail!("explicit point demands must be finite and >= 0");
            }
        }
        Ok(())
    }

    pub fn scenario_id(&self) -> String {
        self.id.clone().unwrap_or_else(|| "scenario".to_string())
    }
}

/// A scenario realized for one seed.
#[derive(Debug, Clone)]
pub struct Instance {
    pub id: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub demand: DemandProfile,
    pub patterns: PatternSet,
    pub radio: RadioConfig,
    pub solver: EnergyConfig,
    pub bias_fit: Option<BiasFitConfig>,
}

/// Per-run overrides applied on top of the scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub demand_bps: Option<f64>,
    pub points: Option<usize>,
}

pub fn realize(file: &ScenarioFile, seed: u64, ov: Overrides) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topology = match &file.cells {
        CellSource::Explicit(cells) => NetworkTopology::new(cells.clone())?,
        CellSource::Generate(l) => {
            let layout = LayoutParams {
                isd_m: l.isd_m,
                min_distances: l.min_distances,
                ..LayoutParams::new(l.macros, l.picos_per_macro, 0)
            };
            drop_cells(&mut rng, &layout)?
        }
    };
    let mut points = match &file.points {
        PointSource::Explicit(list) => {
            if ov.points.is_some() {
                bail!("a point-count sweep needs generated points");
            }
            list.iter()
                .enumerate()
                .map(|(k, p)| TestPoint { id: k as u32, position: Position::new(p.x, p.y), demand_bps: p.demand_bps })
                .collect()
        }
        PointSource::Generate(l) => {
            let count = ov.points.unwrap_or(l.count);
            drop_points(&mut rng, &topology, count, l.isd_m, 0.0, &l.min_distances)?
        }
    };
    let per_point = match (ov.demand_bps, file.demand) {
        (Some(d), _) => Some(d),
        (None, Some(DemandSpec::PerPointBps(d))) => Some(d),
        (None, Some(DemandSpec::Traffic(tm))) => Some(demand_from_queue(&tm)?),
        (None, None) => None,
    };
    if let Some(d) = per_point {
        if !(d.is_finite() && d >= 0.0) {
            bail!("demand must be finite and >= 0, got {d}");
        }
        for p in &mut points {
            p.demand_bps = d;
        }
    }
    let gains = draw_gains(&mut rng, &topology, &points, &file.radio)?;
    let demand = DemandProfile::from_points(&points)?;
    let patterns = pattern_set(&file.patterns, &topology)?;
    Ok(Instance {
        id: file.scenario_id(),
        seed,
        scenario: Scenario { topology, points, gains },
        demand,
        patterns,
        radio: file.radio.clone(),
        solver: file.solver.clone(),
        bias_fit: file.bias_fit.clone(),
    })
}

pub fn pattern_set(spec: &PatternSpec, topo: &NetworkTopology) -> Result<PatternSet> {
    let b = topo.len();
    Ok(match spec {
        PatternSpec::All => enumerate_all(b)?,
        PatternSpec::Reuse1 => reuse1(b)?,
        PatternSpec::Feature => feature_patterns(topo)?,
        PatternSpec::Clusters(ids) => {
            if ids.len() != b {
                bail!("cluster map has {} entries for {b} cells", ids.len());
            }
            cluster_patterns(&ClusterMap::new(ids.clone())?)?
        }
        PatternSpec::Rows(rows) => PatternSet::from_rows(rows, Provenance::Custom)?,
    })
}

/// Default cluster pattern set: each macro with its picos split into two
/// clusters per site.
pub fn tier_clusters(topo: &NetworkTopology) -> Result<PatternSet> {
    Ok(cluster_patterns(&TierLayout::detect(topo)?.cluster_map())?)
}
