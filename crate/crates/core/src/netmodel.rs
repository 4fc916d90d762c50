//! Network description, propagation, rates and power consumption.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::patterns::PatternSet;
use crate::units::{db_to_linear, dbm_to_watts};
use crate::{Error, Result, ACTIVITY_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Macro,
    Pico,
}

/// A value per cell tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerKind<T> {
    #[serde(rename = "macro")]
    pub macro_cell: T,
    pub pico: T,
}

impl<T: Copy> PerKind<T> {
    pub fn get(&self, kind: CellKind) -> T {
        match kind {
            CellKind::Macro => self.macro_cell,
            CellKind::Pico => self.pico,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: u32,
    pub kind: CellKind,
    pub position: Position,
    /// Total transmit power over the whole band (dBm).
    pub tx_power_dbm: f64,
    pub antenna_gain_db: f64,
    /// Operational power at full utilization (W).
    pub op_power_max_w: f64,
    /// Share of `op_power_max_w` drawn whenever the cell is on.
    pub fixed_fraction: f64,
}

impl Cell {
    /// Macro cell with the reference parameters: 46 dBm, 15 dB antenna gain,
    /// 439 W operational power, constant consumption.
    pub fn macro_cell(id: u32, position: Position) -> Self {
        Cell {
            id,
            kind: CellKind::Macro,
            position,
            tx_power_dbm: 46.0,
            antenna_gain_db: 15.0,
            op_power_max_w: 439.0,
            fixed_fraction: 1.0,
        }
    }

    /// Pico cell with the reference parameters: 30 dBm, 5 dB antenna gain,
    /// 38 W operational power, half of it fixed.
    pub fn pico_cell(id: u32, position: Position) -> Self {
        Cell {
            id,
            kind: CellKind::Pico,
            position,
            tx_power_dbm: 30.0,
            antenna_gain_db: 5.0,
            op_power_max_w: 38.0,
            fixed_fraction: 0.5,
        }
    }

    pub fn tx_power_w(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }
}

/// Validated list of cells. Cell `b` of every matrix in the crate is
/// `cells()[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Cell>", into = "Vec<Cell>")]
pub struct NetworkTopology {
    cells: Vec<Cell>,
}

impl NetworkTopology {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Config("topology has no cells".into()));
        }
        let mut ids: Vec<u32> = cells.iter().map(|c| c.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("cell ids are not unique".into()));
        }
        for c in &cells {
            if !(c.op_power_max_w > 0.0) || !c.op_power_max_w.is_finite() {
                return Err(Error::Config(format!("cell {}: op_power_max must be > 0", c.id)));
            }
            if !(c.fixed_fraction > 0.0 && c.fixed_fraction <= 1.0) {
                return Err(Error::Config(format!(
                    "cell {}: fixed_fraction must lie in (0, 1]",
                    c.id
                )));
            }
            if !c.tx_power_dbm.is_finite() || !c.antenna_gain_db.is_finite() {
                return Err(Error::Config(format!("cell {}: non-finite radio parameter", c.id)));
            }
        }
        Ok(NetworkTopology { cells })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn op_power(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.op_power_max_w).collect()
    }
}

impl TryFrom<Vec<Cell>> for NetworkTopology {
    type Error = Error;
    fn try_from(cells: Vec<Cell>) -> Result<Self> {
        NetworkTopology::new(cells)
    }
}

impl From<NetworkTopology> for Vec<Cell> {
    fn from(t: NetworkTopology) -> Self {
        t.cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FadingModel {
    /// Large-scale gains only (|h| = 1).
    None,
    /// Average the rate over i.i.d. Rayleigh draws of every link.
    Rayleigh { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub bandwidth_hz: f64,
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub penetration_loss_db: f64,
    pub shadowing_std_db: PerKind<f64>,
    pub intercell_shadowing_corr: PerKind<f64>,
    #[serde(default = "no_fading")]
    pub fading: FadingModel,
}

fn no_fading() -> FadingModel {
    FadingModel::None
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            bandwidth_hz: 10e6,
            noise_density_dbm_hz: -174.0,
            noise_figure_db: 9.0,
            penetration_loss_db: 20.0,
            shadowing_std_db: PerKind { macro_cell: 8.0, pico: 10.0 },
            intercell_shadowing_corr: PerKind { macro_cell: 1.0, pico: 0.5 },
            fading: FadingModel::None,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        for kind in [CellKind::Macro, CellKind::Pico] {
            let s = self.shadowing_std_db.get(kind);
            let r = self.intercell_shadowing_corr.get(kind);
            if !(s >= 0.0) {
                return Err(Error::Config("shadowing std must be >= 0".into()));
            }
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config("shadowing correlation must lie in [0, 1]".into()));
            }
        }
        if let FadingModel::Rayleigh { samples, .. } = self.fading {
            if samples == 0 {
                return Err(Error::Config("fading sample count must be positive".into()));
            }
        }
        Ok(())
    }

    /// Noise power spectral density σ² in W/Hz (thermal density plus noise figure).
    pub fn noise_psd_w_hz(&self) -> f64 {
        dbm_to_watts(self.noise_density_dbm_hz + self.noise_figure_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestPoint {
    pub id: u32,
    pub position: Position,
    pub demand_bps: f64,
}

/// Linear large-scale gains `G[b][k]`, antenna gain, path loss, shadowing and
/// penetration included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelGains {
    cells: usize,
    points: usize,
    g: Vec<f64>,
}

impl ChannelGains {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cells = rows.len();
        let points = rows.first().map_or(0, Vec::len);
        if cells == 0 || points == 0 {
            return Err(Error::Dimension("gain matrix must be non-empty".into()));
        }
        if rows.iter().any(|r| r.len() != points) {
            return Err(Error::Dimension("gain matrix rows differ in length".into()));
        }
        let g: Vec<f64> = rows.into_iter().flatten().collect();
        if g.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("gains must be finite and positive".into()));
        }
        Ok(ChannelGains { cells, points, g })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn get(&self, b: usize, k: usize) -> f64 {
        self.g[b * self.points + k]
    }
}

/// Precomputed `r[k][b][i]` in bit/s.
///
/// Stored pattern-major (`i`, then `b`, then `k`) so that a pricing sweep over
/// test points for a fixed (cell, pattern) reads a contiguous slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    points: usize,
    cells: usize,
    patterns: usize,
    r: Vec<f64>,
}

impl RateTable {
    pub fn zeros(points: usize, cells: usize, patterns: usize) -> Self {
        RateTable { points, cells, patterns, r: vec![0.0; points * cells * patterns] }
    }

    /// Build from a `[k][b][i]` nested array.
    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let points = nested.len();
        let cells = nested.first().map_or(0, Vec::len);
        let patterns = nested.first().and_then(|c| c.first()).map_or(0, Vec::len);
        if points == 0 || cells == 0 || patterns == 0 {
            return Err(Error::Dimension("rate table must be non-empty".into()));
        }
        let mut t = RateTable::zeros(points, cells, patterns);
        for (k, per_cell) in nested.iter().enumerate() {
            if per_cell.len() != cells {
                return Err(Error::Dimension("ragged rate table".into()));
            }
            for (b, per_pattern) in per_cell.iter().enumerate() {
                if per_pattern.len() != patterns {
                    return Err(Error::Dimension("ragged rate table".into()));
                }
                for (i, &v) in per_pattern.iter().enumerate() {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::Domain("rates must be finite and >= 0".into()));
                    }
                    t.set(k, b, i, v);
                }
            }
        }
        Ok(t)
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn patterns(&self) -> usize {
        self.patterns
    }

    #[inline]
    fn idx(&self, k: usize, b: usize, i: usize) -> usize {
        (i * self.cells + b) * self.points + k
    }

    #[inline]
    pub fn get(&self, k: usize, b: usize, i: usize) -> f64 {
        self.r[self.idx(k, b, i)]
    }

    #[inline]
    pub fn set(&mut self, k: usize, b: usize, i: usize, v: f64) {
        let ix = self.idx(k, b, i);
        self.r[ix] = v;
    }

    /// Rates of every test point for cell `b` under pattern `i`.
    #[inline]
    pub fn column(&self, b: usize, i: usize) -> &[f64] {
        let start = (i * self.cells + b) * self.points;
        &self.r[start..start + self.points]
    }

    pub fn max_rate(&self) -> f64 {
        self.r.iter().copied().fold(0.0, f64::max)
    }

    /// Copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> RateTable {
        let mut out = self.clone();
        out.r.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Copy with `r[k][b][i]` zeroed wherever `allowed[k][b]` is false.
    pub fn masked(&self, allowed: &[Vec<bool>]) -> Result<RateTable> {
        if allowed.len() != self.points || allowed.iter().any(|r| r.len() != self.cells) {
            return Err(Error::Dimension("association mask shape differs from rate table".into()));
        }
        let mut out = self.clone();
        for i in 0..self.patterns {
            for b in 0..self.cells {
                for k in 0..self.points {
                    if !allowed[k][b] {
                        out.set(k, b, i, 0.0);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copy keeping only the listed test points, in the given order.
    pub fn select_points(&self, keep: &[usize]) -> RateTable {
        let mut out = RateTable::zeros(keep.len(), self.cells, self.patterns);
        for i in 0..self.patterns {
            for b in 0..self.cells {
                for (nk, &k) in keep.iter().enumerate() {
                    out.set(nk, b, i, self.get(k, b, i));
                }
            }
        }
        out
    }
}

/// Path loss in dB at `distance_km` for the given tier.
pub fn path_loss(kind: CellKind, distance_km: f64) -> Result<f64> {
    if !(distance_km > 0.0) || !distance_km.is_finite() {
        return Err(Error::Domain(format!("path loss distance must be > 0 km, got {distance_km}")));
    }
    Ok(match kind {
        CellKind::Macro => 128.1 + 37.6 * distance_km.log10(),
        CellKind::Pico => 140.7 + 36.7 * distance_km.log10(),
    })
}

/// Linear operational-power model `P_OP = slope·P_tx + offset` (W).
pub fn op_power_from_tx(kind: CellKind, tx_power_w: f64) -> Result<f64> {
    if !(tx_power_w >= 0.0) {
        return Err(Error::Domain(format!("transmit power must be >= 0 W, got {tx_power_w}")));
    }
    let (slope, offset) = match kind {
        CellKind::Macro => (22.6 / 3.0, 412.4 / 3.0),
        CellKind::Pico => (5.5, 32.0),
    };
    Ok(slope * tx_power_w + offset)
}

/// Linear gain of the link from `cell` to a receiver at `at`, given the
/// shadowing draw in dB.
pub fn link_gain(cell: &Cell, at: &Position, radio: &RadioConfig, shadowing_db: f64) -> Result<f64> {
    let d_km = cell.position.distance(at) / 1000.0;
    let pl = path_loss(cell.kind, d_km)?;
    Ok(db_to_linear(cell.antenna_gain_db - pl - radio.penetration_loss_db - shadowing_db))
}

fn check_shapes(
    topo: &NetworkTopology,
    gains: &ChannelGains,
    patterns: &PatternSet,
) -> Result<()> {
    if gains.cells() != topo.len() || patterns.cells() != topo.len() {
        return Err(Error::Dimension(format!(
            "topology has {} cells, gains {}, patterns {}",
            topo.len(),
            gains.cells(),
            patterns.cells()
        )));
    }
    Ok(())
}

/// SINR of point `k` served by cell `b` under pattern `i`, with unit
/// small-scale fading.
pub fn sinr(
    k: usize,
    b: usize,
    i: usize,
    gains: &ChannelGains,
    topo: &NetworkTopology,
    radio: &RadioConfig,
    patterns: &PatternSet,
) -> Result<f64> {
    check_shapes(topo, gains, patterns)?;
    if k >= gains.points() || b >= topo.len() || i >= patterns.len() {
        return Err(Error::Dimension(format!("index (k={k}, b={b}, i={i}) out of range")));
    }
    let psd = psd_per_cell(topo, radio);
    let rx: Vec<f64> = (0..topo.len()).map(|l| psd[l] * gains.get(l, k)).collect();
    Ok(sinr_from_rx(&rx, b, patterns.row_mask(i), radio.noise_psd_w_hz()))
}

fn psd_per_cell(topo: &NetworkTopology, radio: &RadioConfig) -> Vec<f64> {
    topo.cells().iter().map(|c| c.tx_power_w() / radio.bandwidth_hz).collect()
}

#[inline]
fn sinr_from_rx(rx: &[f64], b: usize, mask: u64, noise: f64) -> f64 {
    if mask & (1 << b) == 0 {
        return 0.0;
    }
    let mut interference = 0.0;
    for (l, &p) in rx.iter().enumerate() {
        if l != b && mask & (1 << l) != 0 {
            interference += p;
        }
    }
    rx[b] / (noise + interference)
}

/// Rate table `r[k][b][i] = W·E[log2(1 + SINR)]`.
///
/// Entries are computed independently, so the parallel schedule does not
/// affect the result.
pub fn build_rate_table(
    topo: &NetworkTopology,
    gains: &ChannelGains,
    radio: &RadioConfig,
    patterns: &PatternSet,
) -> Result<RateTable> {
    radio.validate()?;
    check_shapes(topo, gains, patterns)?;
    let (kk, bb, ii) = (gains.points(), topo.len(), patterns.len());
    let psd = psd_per_cell(topo, radio);
    let noise = radio.noise_psd_w_hz();
    let w = radio.bandwidth_hz;
    let masks: Vec<u64> = (0..ii).map(|i| patterns.row_mask(i)).collect();

    let per_point: Vec<Vec<f64>> = (0..kk)
        .into_par_iter()
        .map(|k| {
            let rx: Vec<f64> = (0..bb).map(|l| psd[l] * gains.get(l, k)).collect();
            let mut out = vec![0.0; bb * ii];
            match radio.fading {
                FadingModel::None => {
                    for (i, &mask) in masks.iter().enumerate() {
                        for b in 0..bb {
                            let s = sinr_from_rx(&rx, b, mask, noise);
                            out[i * bb + b] = if s > 0.0 { w * (1.0 + s).log2() } else { 0.0 };
                        }
                    }
                }
                FadingModel::Rayleigh { samples, seed } => {
                    // Common draws across patterns keep the interference
                    // monotonicity exact sample by sample.
                    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                    let draws: Vec<Vec<f64>> = (0..samples)
                        .map(|_| (0..bb).map(|_| rng.sample::<f64, _>(Exp1)).collect())
                        .collect();
                    let mut faded = vec![0.0; bb];
                    for h in &draws {
                        for l in 0..bb {
                            faded[l] = rx[l] * h[l];
                        }
                        for (i, &mask) in masks.iter().enumerate() {
                            for b in 0..bb {
                                let s = sinr_from_rx(&faded, b, mask, noise);
                                if s > 0.0 {
                                    out[i * bb + b] += w * (1.0 + s).log2();
                                }
                            }
                        }
                    }
                    for v in &mut out {
                        *v /= samples as f64;
                    }
                }
            }
            out
        })
        .collect();

    let mut table = RateTable::zeros(kk, bb, ii);
    for (k, out) in per_point.iter().enumerate() {
        for i in 0..ii {
            for b in 0..bb {
                table.set(k, b, i, out[i * bb + b]);
            }
        }
    }
    Ok(table)
}

/// Total operational power for per-cell usage `rho`, with the default
/// activity threshold.
pub fn total_power(rho: &[f64], topo: &NetworkTopology) -> Result<f64> {
    total_power_with_threshold(rho, topo, ACTIVITY_THRESHOLD)
}

pub fn total_power_with_threshold(
    rho: &[f64],
    topo: &NetworkTopology,
    threshold: f64,
) -> Result<f64> {
    if rho.len() != topo.len() {
        return Err(Error::Dimension(format!(
            "usage vector has {} entries for {} cells",
            rho.len(),
            topo.len()
        )));
    }
    let mut total = 0.0;
    for (r, cell) in rho.iter().zip(topo.cells()) {
        if !(*r >= -1e-9 && *r <= 1.0 + 1e-9) {
            return Err(Error::Domain(format!("cell {} usage {r} outside [0, 1]", cell.id)));
        }
        let q = cell.fixed_fraction;
        let on = if *r > threshold { 1.0 } else { 0.0 };
        total += ((1.0 - q) * r.max(0.0) + q * on) * cell.op_power_max_w;
    }
    Ok(total)
}

/// File-transfer traffic at a test point, served as an M/M/1 queue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficModel {
    /// Mean request arrival rate (1/s).
    pub arrival_rate: f64,
    /// Mean file size (bit).
    pub mean_file_size_bits: f64,
    /// Target mean sojourn time (s).
    pub sojourn_target_s: f64,
}

/// Minimum average rate that keeps the mean sojourn time at or below the
/// target: `L/τ + λL`.
pub fn demand_from_queue(tm: &TrafficModel) -> Result<f64> {
    if !(tm.sojourn_target_s > 0.0) {
        return Err(Error::Domain("sojourn target must be positive".into()));
    }
    if !(tm.arrival_rate >= 0.0 && tm.mean_file_size_bits >= 0.0) {
        return Err(Error::Domain("arrival rate and file size must be >= 0".into()));
    }
    Ok(tm.mean_file_size_bits / tm.sojourn_target_s + tm.arrival_rate * tm.mean_file_size_bits)
}

/// Minimum separations (m) enforced when dropping cells and points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinDistances {
    pub macro_ue: f64,
    pub pico_ue: f64,
    pub macro_pico: f64,
    pub pico_pico: f64,
}

impl Default for MinDistances {
    fn default() -> Self {
        MinDistances { macro_ue: 35.0, pico_ue: 10.0, macro_pico: 75.0, pico_pico: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutParams {
    pub macros: usize,
    pub picos_per_macro: usize,
    pub test_points: usize,
    /// Inter-site distance between macro sites (m); each macro covers a disc
    /// of radius `isd_m / 2`.
    #[serde(default = "default_isd")]
    pub isd_m: f64,
    /// Demand assigned to every generated test point (bit/s).
    #[serde(default)]
    pub demand_bps: f64,
    #[serde(default)]
    pub min_distances: MinDistances,
}

fn default_isd() -> f64 {
    500.0
}

impl LayoutParams {
    pub fn new(macros: usize, picos_per_macro: usize, test_points: usize) -> Self {
        LayoutParams {
            macros,
            picos_per_macro,
            test_points,
            isd_m: default_isd(),
            demand_bps: 0.0,
            min_distances: MinDistances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: NetworkTopology,
    pub points: Vec<TestPoint>,
    pub gains: ChannelGains,
}

const DROP_ATTEMPTS: usize = 10_000;

/// Macro site positions on a hexagonal lattice: the center first, then the
/// surrounding ring(s) counter-clockwise from the positive x-axis.
pub fn macro_sites(count: usize, isd: f64) -> Vec<Position> {
    let mut sites = vec![Position::new(0.0, 0.0)];
    let mut ring = 1usize;
    while sites.len() < count {
        // Walk the hexagonal ring of radius `ring`.
        let corners: Vec<(f64, f64)> = (0..6)
            .map(|s| {
                let a = std::f64::consts::PI / 3.0 * s as f64;
                (a.cos() * ring as f64 * isd, a.sin() * ring as f64 * isd)
            })
            .collect();
        for s in 0..6 {
            let (x0, y0) = corners[s];
            let (x1, y1) = corners[(s + 1) % 6];
            for step in 0..ring {
                let t = step as f64 / ring as f64;
                sites.push(Position::new(x0 + (x1 - x0) * t, y0 + (y1 - y0) * t));
            }
        }
        ring += 1;
    }
    sites.truncate(count);
    sites
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, center: &Position, radius: f64) -> Position {
    let r = radius * rng.random::<f64>().sqrt();
    let a = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    Position::new(center.x + r * a.cos(), center.y + r * a.sin())
}

/// Draws shadowing values (dB) for every cell at one receiver location.
///
/// Within a tier, values follow a one-factor model: `σ(√ρ·c + √(1-ρ)·e_b)`
/// with a common factor `c` shared by the tier and idiosyncratic `e_b`. The
/// two tiers are independent.
pub struct ShadowingSampler {
    kinds: Vec<CellKind>,
    std: PerKind<f64>,
    corr: PerKind<f64>,
}

impl ShadowingSampler {
    pub fn new(topo: &NetworkTopology, radio: &RadioConfig) -> Self {
        ShadowingSampler {
            kinds: topo.cells().iter().map(|c| c.kind).collect(),
            std: radio.shadowing_std_db,
            corr: radio.intercell_shadowing_corr,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let common_macro: f64 = rng.sample(StandardNormal);
        let common_pico: f64 = rng.sample(StandardNormal);
        self.kinds
            .iter()
            .map(|&kind| {
                let own: f64 = rng.sample(StandardNormal);
                let common = match kind {
                    CellKind::Macro => common_macro,
                    CellKind::Pico => common_pico,
                };
                let rho = self.corr.get(kind);
                self.std.get(kind) * (rho.sqrt() * common + (1.0 - rho).sqrt() * own)
            })
            .collect()
    }
}

/// Drop picos around each macro site, satisfying the minimum separations.
pub fn drop_cells(rng: &mut ChaCha8Rng, layout: &LayoutParams) -> Result<NetworkTopology> {
    if layout.macros == 0 {
        return Err(Error::Config("layout needs at least one macro".into()));
    }
    let md = layout.min_distances;
    let radius = layout.isd_m / 2.0;
    let sites = macro_sites(layout.macros, layout.isd_m);
    let mut cells: Vec<Cell> = sites
        .iter()
        .enumerate()
        .map(|(m, p)| Cell::macro_cell(m as u32 + 1, *p))
        .collect();
    for m in 0..layout.macros {
        for _ in 0..layout.picos_per_macro {
            let mut placed = None;
            for _ in 0..DROP_ATTEMPTS {
                let cand = uniform_in_disc(rng, &sites[m], radius);
                let ok = cells.iter().all(|c| {
                    let min = match c.kind {
                        CellKind::Macro => md.macro_pico,
                        CellKind::Pico => md.pico_pico,
                    };
                    c.position.distance(&cand) >= min
                });
                if ok {
                    placed = Some(cand);
                    break;
                }
            }
            let pos = placed.ok_or_else(|| {
                Error::Generation(format!(
                    "could not place pico {} of macro {} within {DROP_ATTEMPTS} attempts",
                    cells.len() + 1,
                    m + 1
                ))
            })?;
            let id = cells.len() as u32 + 1;
            cells.push(Cell::pico_cell(id, pos));
        }
    }
    NetworkTopology::new(cells)
}

/// Drop test points uniformly over the macro coverage discs.
pub fn drop_points(
    rng: &mut ChaCha8Rng,
    topo: &NetworkTopology,
    count: usize,
    isd_m: f64,
    demand_bps: f64,
    md: &MinDistances,
) -> Result<Vec<TestPoint>> {
    let sites: Vec<Position> = topo
        .cells()
        .iter()
        .filter(|c| c.kind == CellKind::Macro)
        .map(|c| c.position)
        .collect();
    let centers = if sites.is_empty() {
        topo.cells().iter().map(|c| c.position).collect()
    } else {
        sites
    };
    let radius = isd_m / 2.0;
    let mut points = Vec::with_capacity(count);
    for k in 0..count {
        let mut placed = None;
        for _ in 0..DROP_ATTEMPTS {
            let site = &centers[rng.random_range(0..centers.len())];
            let cand = uniform_in_disc(rng, site, radius);
            let ok = topo.cells().iter().all(|c| {
                let min = match c.kind {
                    CellKind::Macro => md.macro_ue,
                    CellKind::Pico => md.pico_ue,
                };
                c.position.distance(&cand) >= min
            });
            if ok {
                placed = Some(cand);
                break;
            }
        }
        let position = placed.ok_or_else(|| {
            Error::Generation(format!("could not place test point {k} within {DROP_ATTEMPTS} attempts"))
        })?;
        points.push(TestPoint { id: k as u32, position, demand_bps });
    }
    Ok(points)
}

/// Draw shadowing and compute the gain matrix for given cells and points.
pub fn draw_gains(
    rng: &mut ChaCha8Rng,
    topo: &NetworkTopology,
    points: &[TestPoint],
    radio: &RadioConfig,
) -> Result<ChannelGains> {
    radio.validate()?;
    let sampler = ShadowingSampler::new(topo, radio);
    let mut rows = vec![vec![0.0; points.len()]; topo.len()];
    for (k, p) in points.iter().enumerate() {
        let shadow = sampler.sample(rng);
        for (b, cell) in topo.cells().iter().enumerate() {
            rows[b][k] = link_gain(cell, &p.position, radio, shadow[b])?;
        }
    }
    ChannelGains::from_rows(rows)
}

/// Seeded drop of a macro/pico layout with test points and shadowed gains.
/// Cells are numbered macros first, then the picos of macro 1, macro 2, ...
pub fn generate_scenario(seed: u64, layout: &LayoutParams, radio: &RadioConfig) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topology = drop_cells(&mut rng, layout)?;
    let points = drop_points(
        &mut rng,
        &topology,
        layout.test_points,
        layout.isd_m,
        layout.demand_bps,
        &layout.min_distances,
    )?;
    let gains = draw_gains(&mut rng, &topology, &points, radio)?;
    Ok(Scenario { topology, points, gains })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns;

    fn two_cell_topology() -> NetworkTopology {
        NetworkTopology::new(vec![
            Cell::macro_cell(1, Position::new(0.0, 0.0)),
            Cell::pico_cell(2, Position::new(200.0, 0.0)),
        ])
        .unwrap()
    }

    #[test]
    fn path_loss_reference_values() {
        assert!((path_loss(CellKind::Macro, 1.0).unwrap() - 128.1).abs() < 1e-12);
        assert!((path_loss(CellKind::Pico, 1.0).unwrap() - 140.7).abs() < 1e-12);
        // 128.1 + 37.6·log10(0.5) = 128.1 − 11.3186
        assert!((path_loss(CellKind::Macro, 0.5).unwrap() - 116.78).abs() < 5e-3);
        assert!(path_loss(CellKind::Macro, 0.0).is_err());
        assert!(path_loss(CellKind::Pico, -1.0).is_err());
    }

    #[test]
    fn op_power_reference_values() {
        let macro_w = op_power_from_tx(CellKind::Macro, dbm_to_watts(46.0)).unwrap();
        assert!((macro_w - 437.4).abs() < 0.05, "{macro_w}");
        assert!((macro_w - 439.0).abs() <= 2.0);
        let macro_40 = op_power_from_tx(CellKind::Macro, 40.0).unwrap();
        assert!((macro_40 - 439.0).abs() <= 2.0);
        let pico_w = op_power_from_tx(CellKind::Pico, 1.0).unwrap();
        assert!((pico_w - 37.5).abs() < 1e-12);
        assert!((op_power_from_tx(CellKind::Macro, 0.0).unwrap() - 137.4667).abs() < 1e-3);
        assert!(op_power_from_tx(CellKind::Pico, -0.1).is_err());
    }

    #[test]
    fn sinr_special_cases() {
        let topo = two_cell_topology();
        let radio = RadioConfig::default();
        let gains = ChannelGains::from_rows(vec![vec![1e-12], vec![1e-11]]).unwrap();
        let pats = patterns::enumerate_all(2).unwrap();
        let psd: Vec<f64> = topo.cells().iter().map(|c| c.tx_power_w() / 10e6).collect();
        let noise = radio.noise_psd_w_hz();
        // Canonical order for two cells: [0,1], [1,0], [1,1].
        let only_pico = pats.index_of(&[0, 1]).unwrap();
        let s = sinr(0, 1, only_pico, &gains, &topo, &radio, &pats).unwrap();
        assert!((s - psd[1] * 1e-11 / noise).abs() / s < 1e-12);
        assert_eq!(sinr(0, 0, only_pico, &gains, &topo, &radio, &pats).unwrap(), 0.0);
    }

    #[test]
    fn sinr_equal_received_power_tends_to_one() {
        let topo = NetworkTopology::new(vec![
            Cell::pico_cell(1, Position::new(0.0, 0.0)),
            Cell::pico_cell(2, Position::new(100.0, 0.0)),
        ])
        .unwrap();
        let mut radio = RadioConfig::default();
        radio.noise_density_dbm_hz = -300.0;
        let gains = ChannelGains::from_rows(vec![vec![1e-6], vec![1e-6]]).unwrap();
        let pats = patterns::reuse1(2).unwrap();
        let s = sinr(0, 0, 0, &gains, &topo, &radio, &pats).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rate_table_unit_sinr() {
        // Single cell whose received PSD equals the noise PSD.
        let topo = NetworkTopology::new(vec![Cell::pico_cell(1, Position::default())]).unwrap();
        let radio = RadioConfig::default();
        let g = radio.noise_psd_w_hz() / (topo.cells()[0].tx_power_w() / radio.bandwidth_hz);
        let gains = ChannelGains::from_rows(vec![vec![g]]).unwrap();
        let pats = patterns::reuse1(1).unwrap();
        let r = build_rate_table(&topo, &gains, &radio, &pats).unwrap();
        assert!((r.get(0, 0, 0) - 1e7).abs() < 1e-3);
    }

    #[test]
    fn rate_table_matches_scalar_formula() {
        let topo = two_cell_topology();
        let radio = RadioConfig::default();
        let gains = ChannelGains::from_rows(vec![vec![3e-13, 2e-14], vec![5e-14, 4e-12]]).unwrap();
        let pats = patterns::enumerate_all(2).unwrap();
        let r = build_rate_table(&topo, &gains, &radio, &pats).unwrap();
        // Independent per-entry evaluation in dBm-domain arithmetic.
        let noise_w = 10f64.powf((-174.0 + 9.0 - 30.0) / 10.0);
        let p = [10f64.powf((46.0 - 30.0) / 10.0) / 1e7, 10f64.powf((30.0 - 30.0) / 10.0) / 1e7];
        let g = [[3e-13, 2e-14], [5e-14, 4e-12]];
        for i in 0..pats.len() {
            let a = pats.row(i);
            for k in 0..2 {
                for b in 0..2 {
                    let expected = if a[b] == 0 {
                        0.0
                    } else {
                        let other = 1 - b;
                        let interf = a[other] as f64 * p[other] * g[other][k];
                        1e7 * (1.0 + p[b] * g[b][k] / (noise_w + interf)).log2()
                    };
                    let got = r.get(k, b, i);
                    assert!((got - expected).abs() <= 1e-9 * expected.max(1.0), "{k} {b} {i}");
                }
            }
        }
    }

    #[test]
    fn total_power_cases() {
        let topo = two_cell_topology();
        assert_eq!(total_power(&[0.0, 0.0], &topo).unwrap(), 0.0);
        assert!((total_power(&[1.0, 1.0], &topo).unwrap() - 477.0).abs() < 1e-12);
        let single = NetworkTopology::new(vec![Cell::macro_cell(1, Position::default())]).unwrap();
        assert!((total_power(&[0.3], &single).unwrap() - 439.0).abs() < 1e-12);
        assert!(total_power(&[1.1, 0.0], &topo).is_err());
        assert!(total_power(&[0.0], &topo).is_err());
    }

    #[test]
    fn total_power_jumps_at_threshold() {
        let topo = two_cell_topology();
        let below = total_power(&[0.0, ACTIVITY_THRESHOLD], &topo).unwrap();
        let above = total_power(&[0.0, ACTIVITY_THRESHOLD * (1.0 + 1e-9)], &topo).unwrap();
        assert!((above - below - 0.5 * 38.0).abs() < 1e-6);
    }

    #[test]
    fn queue_demand() {
        let d = |l, s, t| {
            demand_from_queue(&TrafficModel {
                arrival_rate: l,
                mean_file_size_bits: s,
                sojourn_target_s: t,
            })
        };
        assert_eq!(d(0.0, 1e6, 1.0).unwrap(), 1e6);
        assert!((d(2.0, 5e5, 2.0).unwrap() - 1.25e6).abs() < 1e-6);
        assert_eq!(d(1.0, 0.0, 1.0).unwrap(), 0.0);
        assert!(d(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn scenario_is_seed_deterministic() {
        let layout = LayoutParams::new(3, 4, 30);
        let radio = RadioConfig::default();
        let a = generate_scenario(7, &layout, &radio).unwrap();
        let b = generate_scenario(7, &layout, &radio).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(8, &layout, &radio).unwrap();
        assert_ne!(a.gains, c.gains);
    }

    #[test]
    fn scenario_respects_min_distances() {
        let layout = LayoutParams::new(3, 4, 60);
        let s = generate_scenario(11, &layout, &RadioConfig::default()).unwrap();
        let md = MinDistances::default();
        let cells = s.topology.cells();
        assert_eq!(cells.len(), 15);
        for (a, ca) in cells.iter().enumerate() {
            for cb in &cells[a + 1..] {
                let d = ca.position.distance(&cb.position);
                match (ca.kind, cb.kind) {
                    (CellKind::Pico, CellKind::Pico) => assert!(d >= md.pico_pico),
                    (CellKind::Macro, CellKind::Pico) | (CellKind::Pico, CellKind::Macro) => {
                        assert!(d >= md.macro_pico)
                    }
                    _ => {}
                }
            }
            for p in &s.points {
                let d = ca.position.distance(&p.position);
                let min = if ca.kind == CellKind::Macro { md.macro_ue } else { md.pico_ue };
                assert!(d >= min);
            }
        }
    }

    #[test]
    fn infeasible_layout_reports_generation_error() {
        let mut layout = LayoutParams::new(1, 40, 5);
        layout.isd_m = 100.0;
        let err = generate_scenario(1, &layout, &RadioConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn macro_shadowing_fully_correlated() {
        let topo = NetworkTopology::new(vec![
            Cell::macro_cell(1, Position::new(0.0, 0.0)),
            Cell::macro_cell(2, Position::new(500.0, 0.0)),
            Cell::macro_cell(3, Position::new(250.0, 433.0)),
            Cell::pico_cell(4, Position::new(100.0, 0.0)),
            Cell::pico_cell(5, Position::new(-100.0, 0.0)),
        ])
        .unwrap();
        let sampler = ShadowingSampler::new(&topo, &RadioConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = sampler.sample(&mut rng);
            assert_eq!(s[0], s[1]);
            assert_eq!(s[1], s[2]);
            assert_ne!(s[3], s[4]);
        }
    }

    #[test]
    fn shadowing_moments() {
        let topo = NetworkTopology::new(vec![
            Cell::macro_cell(1, Position::new(0.0, 0.0)),
            Cell::pico_cell(2, Position::new(100.0, 0.0)),
            Cell::pico_cell(3, Position::new(-100.0, 0.0)),
        ])
        .unwrap();
        let sampler = ShadowingSampler::new(&topo, &RadioConfig::default());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let draws: Vec<Vec<f64>> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let std = |b: usize| {
            let mean = draws.iter().map(|d| d[b]).sum::<f64>() / n as f64;
            (draws.iter().map(|d| (d[b] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        assert!((std(0) - 8.0).abs() / 8.0 < 0.05);
        assert!((std(1) - 10.0).abs() / 10.0 < 0.05);
        assert!((std(2) - 10.0).abs() / 10.0 < 0.05);
        let corr = draws.iter().map(|d| d[1] * d[2]).sum::<f64>() / n as f64 / 100.0;
        assert!((corr - 0.5).abs() < 0.05, "{corr}");
    }

    #[test]
    fn hex_sites() {
        let s = macro_sites(7, 500.0);
        assert_eq!(s.len(), 7);
        for p in &s[1..] {
            assert!((p.distance(&s[0]) - 500.0).abs() < 1e-9);
        }
        let tri = macro_sites(3, 500.0);
        assert!((tri[1].distance(&tri[2]) - 500.0).abs() < 1e-9);
    }
}
