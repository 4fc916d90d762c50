//! Reference schemes: reuse-1, range-expansion association with fixed
//! association energy minimization, and cell-specific bias fitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::balancer::DemandProfile;
use crate::energymin::{infeasible_report, minimize_energy, EnergyConfig, SolveReport};
use crate::netmodel::{build_rate_table, ChannelGains, NetworkTopology, RadioConfig, RateTable};
use crate::patterns::reuse1;
use crate::units::linear_to_db;
use crate::{Error, Result};

/// Received reference power per cell and point (dBm), large-scale only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsrpTable {
    /// `dbm[b][k]`.
    dbm: Vec<Vec<f64>>,
}

impl RsrpTable {
    pub fn from_rows(dbm: Vec<Vec<f64>>) -> Result<Self> {
        let k = dbm.first().map_or(0, Vec::len);
        if dbm.is_empty() || k == 0 || dbm.iter().any(|r| r.len() != k) {
            return Err(Error::Dimension("RSRP table must be a non-empty rectangle".into()));
        }
        if dbm.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("RSRP entries must be finite".into()));
        }
        Ok(RsrpTable { dbm })
    }

    /// Transmit power plus linear gain (antenna, path loss, shadowing and
    /// penetration), in dBm.
    pub fn from_gains(topo: &NetworkTopology, gains: &ChannelGains) -> Result<Self> {
        if gains.cells() != topo.len() {
            return Err(Error::Dimension("gain matrix and topology disagree in cell count".into()));
        }
        let rows = topo
            .cells()
            .iter()
            .enumerate()
            .map(|(b, c)| (0..gains.points()).map(|k| c.tx_power_dbm + linear_to_db(gains.get(b, k))).collect())
            .collect();
        RsrpTable::from_rows(rows)
    }

    pub fn cells(&self) -> usize {
        self.dbm.len()
    }

    pub fn points(&self) -> usize {
        self.dbm[0].len()
    }

    pub fn get(&self, b: usize, k: usize) -> f64 {
        self.dbm[b][k]
    }
}

/// Per-cell association bias (dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVector(Vec<f64>);

impl BiasVector {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if eta.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("biases must be finite and >= 0 dB".into()));
        }
        Ok(BiasVector(eta))
    }

    pub fn zeros(cells: usize) -> Self {
        BiasVector(vec![0.0; cells])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Association matrix `s[k][b]` with a single 1 per point: the cell
/// maximizing `RSRP + η`, ties to the lowest index.
pub fn re_associate(rsrp: &RsrpTable, eta: &BiasVector) -> Result<Vec<Vec<u8>>> {
    if eta.values().len() != rsrp.cells() {
        return Err(Error::Dimension("bias vector length differs from cell count".into()));
    }
    Ok((0..rsrp.points())
        .map(|k| {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for b in 0..rsrp.cells() {
                let v = rsrp.get(b, k) + eta.values()[b];
                if v > best_v {
                    best_v = v;
                    best = b;
                }
            }
            let mut row = vec![0u8; rsrp.cells()];
            row[best] = 1;
            row
        })
        .collect())
}

/// Energy minimization restricted to the all-on pattern.
pub fn reuse1_minimize(
    topo: &NetworkTopology,
    gains: &ChannelGains,
    radio: &RadioConfig,
    demand: &DemandProfile,
    cfg: &EnergyConfig,
) -> Result<SolveReport> {
    let patterns = reuse1(topo.len())?;
    let rates = build_rate_table(topo, gains, radio, &patterns)?;
    minimize_energy(topo, &rates, demand, cfg)
}

/// Energy minimization with each point confined to the cells allowed by
/// `association[k][b]`: rates of disallowed links are zeroed and the
/// standard pipeline runs on the masked table.
pub fn fixed_assoc_minimize(
    topo: &NetworkTopology,
    rates: &RateTable,
    association: &[Vec<u8>],
    demand: &DemandProfile,
    cfg: &EnergyConfig,
) -> Result<SolveReport> {
    let allowed: Vec<Vec<bool>> = association.iter().map(|row| row.iter().map(|&s| s != 0).collect()).collect();
    let masked = rates.masked(&allowed)?;
    let stranded = allowed
        .iter()
        .zip(demand.demands())
        .any(|(row, &d)| d > 0.0 && !row.iter().any(|&a| a));
    if stranded {
        return infeasible_report(topo, &masked, demand, cfg.activity_threshold, 0.0);
    }
    minimize_energy(topo, &masked, demand, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BiasFitConfig {
    /// Error weight per cell; `None` weighs every cell equally.
    pub weights: Option<Vec<f64>>,
    pub grid_lo_db: f64,
    pub grid_hi_db: f64,
    pub grid_step_db: f64,
    pub orders: usize,
    pub seed: u64,
}

impl Default for BiasFitConfig {
    fn default() -> Self {
        BiasFitConfig { weights: None, grid_lo_db: 0.0, grid_hi_db: 60.0, grid_step_db: 0.1, orders: 10, seed: 0 }
    }
}

impl BiasFitConfig {
    /// Defaults with error weights proportional to operational power.
    pub fn for_topology(topo: &NetworkTopology) -> Self {
        BiasFitConfig { weights: Some(default_bias_weights(topo)), ..BiasFitConfig::default() }
    }

    fn grid(&self) -> Result<Vec<f64>> {
        if !(self.grid_hi_db > self.grid_lo_db && self.grid_step_db > 0.0 && self.grid_lo_db >= 0.0) {
            return Err(Error::Config("bias grid needs 0 <= lo < hi and step > 0".into()));
        }
        let n = ((self.grid_hi_db - self.grid_lo_db) / self.grid_step_db + 1e-9).floor() as usize;
        Ok((0..=n).map(|j| self.grid_lo_db + j as f64 * self.grid_step_db).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasFit {
    pub eta: BiasVector,
    /// `Σ_b ω_b Σ_k (s_kb(η) − s*_kb)²`.
    pub error: f64,
    /// Share of points whose association row differs from the reference.
    pub mismatch_fraction: f64,
}

fn weighted_error(s: &[Vec<u8>], s_star: &[Vec<u8>], omega: &[f64]) -> f64 {
    let mut e = 0.0;
    for (row, ref_row) in s.iter().zip(s_star) {
        for (b, (&x, &y)) in row.iter().zip(ref_row).enumerate() {
            if x != y {
                e += omega[b];
            }
        }
    }
    e
}

/// Coordinate descent on the bias of one cell at a time, each step a grid
/// search. Runs from zero biases once per random cell order and keeps the
/// best result by (error, biases in lexicographic order).
pub fn fit_biases(
    s_star: &[Vec<u8>],
    rsrp: &RsrpTable,
    cfg: &BiasFitConfig,
) -> Result<BiasFit> {
    let cells = rsrp.cells();
    let points = rsrp.points();
    if s_star.len() != points || s_star.iter().any(|r| r.len() != cells) {
        return Err(Error::Dimension("reference association shape differs from RSRP table".into()));
    }
    let omega: Vec<f64> = match &cfg.weights {
        Some(w) => w.clone(),
        None => vec![1.0; cells],
    };
    if omega.len() != cells || omega.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Config("error weights must be one non-negative value per cell".into()));
    }
    let grid = cfg.grid()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let orders: Vec<Vec<usize>> = (0..cfg.orders.max(1))
        .map(|_| {
            let mut o: Vec<usize> = (0..cells).collect();
            o.shuffle(&mut rng);
            o
        })
        .collect();

    let runs: Vec<(f64, Vec<f64>)> = orders
        .iter()
        .map(|order| descend(order, &grid, s_star, rsrp, &omega))
        .collect::<Result<_>>()?;
    let (error, eta) = runs
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lexicographic(&a.1, &b.1)))
        .expect("at least one order");
    let eta = BiasVector::new(eta)?;
    let s = re_associate(rsrp, &eta)?;
    let mismatched = s.iter().zip(s_star).filter(|(a, b)| a != b).count();
    Ok(BiasFit { eta, error, mismatch_fraction: mismatched as f64 / points as f64 })
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// One coordinate-descent run; sweeps until no coordinate improves.
fn descend(
    order: &[usize],
    grid: &[f64],
    s_star: &[Vec<u8>],
    rsrp: &RsrpTable,
    omega: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let cells = rsrp.cells();
    let mut eta = vec![grid[0]; cells];
    let mut err = weighted_error(&re_associate(rsrp, &BiasVector(eta.clone()))?, s_star, omega);
    loop {
        let mut improved = false;
        for &j in order {
            let (best_v, best_e) = line_search(j, &eta, grid, s_star, rsrp, omega);
            if best_e < err {
                eta[j] = best_v;
                err = best_e;
                improved = true;
            }
        }
        if !improved {
            return Ok((err, eta));
        }
    }
}

/// Grid search over `η_j` with the other biases fixed. Returns the smallest
/// grid value attaining the minimum error.
fn line_search(
    j: usize,
    eta: &[f64],
    grid: &[f64],
    s_star: &[Vec<u8>],
    rsrp: &RsrpTable,
    omega: &[f64],
) -> (f64, f64) {
    let cells = rsrp.cells();
    // Per point: strongest competitor among the other cells.
    let rivals: Vec<(usize, f64)> = (0..rsrp.points())
        .map(|k| {
            let mut best = usize::MAX;
            let mut best_v = f64::NEG_INFINITY;
            for b in (0..cells).filter(|&b| b != j) {
                let v = rsrp.get(b, k) + eta[b];
                if v > best_v {
                    best_v = v;
                    best = b;
                }
            }
            (best, best_v)
        })
        .collect();
    let mut best = (grid[0], f64::INFINITY);
    for &v in grid {
        let mut e = 0.0;
        for (k, &(rival, rival_v)) in rivals.iter().enumerate() {
            let own = rsrp.get(j, k) + v;
            // Ties go to the lower index.
            let chosen = if rival == usize::MAX || own > rival_v || (own == rival_v && j < rival) { j } else { rival };
            for b in 0..cells {
                let s = u8::from(b == chosen);
                if s != s_star[k][b] {
                    e += omega[b];
                }
            }
        }
        if e < best.1 {
            best = (v, e);
        }
    }
    best
}

/// Default error weights: proportional to operational power, largest 1.
pub fn default_bias_weights(topo: &NetworkTopology) -> Vec<f64> {
    let p = topo.op_power();
    let mx = p.iter().copied().fold(0.0, f64::max);
    p.iter().map(|v| v / mx).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strongest_cell_without_bias() {
        let rsrp = RsrpTable::from_rows(vec![vec![-80.0, -90.0], vec![-85.0, -70.0]]).unwrap();
        let s = re_associate(&rsrp, &BiasVector::zeros(2)).unwrap();
        assert_eq!(s, vec![vec![1, 0], vec![0, 1]]);
    }

    #[test]
    fn tie_goes_to_lower_index() {
        let rsrp = RsrpTable::from_rows(vec![vec![-80.0], vec![-100.0]]).unwrap();
        let s = re_associate(&rsrp, &BiasVector::new(vec![0.0, 20.0]).unwrap()).unwrap();
        assert_eq!(s, vec![vec![1, 0]]);
        let s = re_associate(&rsrp, &BiasVector::new(vec![0.0, 25.0]).unwrap()).unwrap();
        assert_eq!(s, vec![vec![0, 1]]);
    }

    #[test]
    fn fit_recovers_zero_bias() {
        let rsrp = RsrpTable::from_rows(vec![vec![-80.0, -90.0, -60.0], vec![-85.0, -70.0, -75.0]]).unwrap();
        let s_star = re_associate(&rsrp, &BiasVector::zeros(2)).unwrap();
        let fit = fit_biases(&s_star, &rsrp, &BiasFitConfig::default()).unwrap();
        assert_eq!(fit.eta.values(), &[0.0, 0.0]);
        assert_eq!(fit.error, 0.0);
    }

    #[test]
    fn fit_crosses_rsrp_gap() {
        let rsrp = RsrpTable::from_rows(vec![vec![-80.0], vec![-87.3]]).unwrap();
        let fit = fit_biases(&[vec![0, 1]], &rsrp, &BiasFitConfig::default()).unwrap();
        assert!(fit.eta.values()[1] - fit.eta.values()[0] >= 7.3);
        assert_eq!(fit.error, 0.0);
        assert_eq!(fit.mismatch_fraction, 0.0);
    }

    #[test]
    fn negative_bias_rejected() {
        assert!(BiasVector::new(vec![-1.0]).is_err());
    }

    #[test]
    fn grid_construction() {
        let g = BiasFitConfig::default().grid().unwrap();
        assert_eq!(g.len(), 601);
        assert!((g[600] - 60.0).abs() < 1e-9);
        let bad = BiasFitConfig { grid_step_db: 0.0, ..BiasFitConfig::default() };
        assert!(bad.grid().is_err());
    }
}
