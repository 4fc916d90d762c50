//! Rate balancing by dual cutting planes.
//!
//! The balancing problem maximizes the total rate `R` subject to every test
//! point receiving at least its demand share `β_k·R`. Its Lagrangian dual is
//! a minimization over the probability simplex; the dual function has a
//! closed-form evaluation (one pattern, one point per cell), so the dual is
//! solved by Kelley's method: a small master LP over the multipliers plus
//! closed-form pricing that generates new cuts. The primal is recovered as the
//! convex combination of cut points weighted by the master's cut multipliers.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lpcore;
use crate::netmodel::{RateTable, TestPoint};
use crate::{Error, Result};

/// Pattern shares at or below this level count as unused.
pub const PATTERN_TOLERANCE: f64 = 1e-9;

/// Slack allowed on the simplex and capacity constraints of an allocation.
pub const ALLOCATION_TOLERANCE: f64 = 1e-9;

/// Per-point rate demands (bit/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    d: Vec<f64>,
}

impl DemandProfile {
    pub fn new(d: Vec<f64>) -> Result<Self> {
        if let Some(v) = d.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!("demand {v} is not a finite value >= 0")));
        }
        Ok(DemandProfile { d })
    }

    pub fn from_points(points: &[TestPoint]) -> Result<Self> {
        DemandProfile::new(points.iter().map(|p| p.demand_bps).collect())
    }

    pub fn uniform(points: usize, demand_bps: f64) -> Result<Self> {
        DemandProfile::new(vec![demand_bps; points])
    }

    pub fn demands(&self) -> &[f64] {
        &self.d
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.d.iter().sum()
    }

    /// Normalized demand `d / Σd`; undefined for zero total demand.
    pub fn beta(&self) -> Result<Vec<f64>> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::Precondition("normalized demand needs a positive total".into()));
        }
        Ok(self.d.iter().map(|v| v / total).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        DemandProfile::new(self.d.iter().map(|v| v * factor).collect())
    }
}

/// Bandwidth split: `α[(k, b, i)]` is the share cell `b` gives point `k`
/// under pattern `i`, and `π[i]` the share of pattern `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AllocationRepr", into = "AllocationRepr")]
pub struct Allocation {
    alpha: BTreeMap<(usize, usize, usize), f64>,
    pi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AllocationRepr {
    pi: Vec<f64>,
    alpha: Vec<AlphaEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlphaEntry {
    k: usize,
    b: usize,
    i: usize,
    value: f64,
}

impl TryFrom<AllocationRepr> for Allocation {
    type Error = Error;
    fn try_from(r: AllocationRepr) -> Result<Self> {
        let mut alpha = BTreeMap::new();
        for e in r.alpha {
            if alpha.insert((e.k, e.b, e.i), e.value).is_some() {
                return Err(Error::Config(format!("duplicate allocation entry ({}, {}, {})", e.k, e.b, e.i)));
            }
        }
        Allocation::from_parts(alpha, r.pi)
    }
}

impl From<Allocation> for AllocationRepr {
    fn from(a: Allocation) -> Self {
        AllocationRepr {
            pi: a.pi,
            alpha: a.alpha.into_iter().map(|((k, b, i), value)| AlphaEntry { k, b, i, value }).collect(),
        }
    }
}

impl Allocation {
    /// No bandwidth used; all pattern share sits on pattern 0.
    pub fn empty(patterns: usize) -> Self {
        let mut pi = vec![0.0; patterns.max(1)];
        pi[0] = 1.0;
        Allocation { alpha: BTreeMap::new(), pi }
    }

    /// Build and check the dimension-free invariants (ranges, simplex,
    /// per-(cell, pattern) capacity).
    pub fn from_parts(alpha: BTreeMap<(usize, usize, usize), f64>, pi: Vec<f64>) -> Result<Self> {
        let a = Allocation { alpha, pi };
        a.check_shape_free()?;
        Ok(a)
    }

    pub(crate) fn from_parts_unchecked(alpha: BTreeMap<(usize, usize, usize), f64>, pi: Vec<f64>) -> Self {
        Allocation { alpha, pi }
    }

    fn check_shape_free(&self) -> Result<()> {
        if self.pi.is_empty() {
            return Err(Error::Domain("pattern share vector is empty".into()));
        }
        if self.pi.iter().any(|p| !(p.is_finite() && *p >= -ALLOCATION_TOLERANCE)) {
            return Err(Error::Domain("pattern shares must be >= 0".into()));
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > ALLOCATION_TOLERANCE {
            return Err(Error::Domain(format!("pattern shares sum to {total}, not 1")));
        }
        let mut per_cell_pattern: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(_, b, i), &v) in &self.alpha {
            if !(v.is_finite() && (0.0..=1.0 + ALLOCATION_TOLERANCE).contains(&v)) {
                return Err(Error::Domain(format!("allocation share {v} outside [0, 1]")));
            }
            if i >= self.pi.len() {
                return Err(Error::Dimension(format!("pattern index {i} out of range")));
            }
            *per_cell_pattern.entry((b, i)).or_default() += v;
        }
        for (&(b, i), &used) in &per_cell_pattern {
            if used > self.pi[i] + ALLOCATION_TOLERANCE {
                return Err(Error::Domain(format!(
                    "cell {b} uses {used} of pattern {i} whose share is {}",
                    self.pi[i]
                )));
            }
        }
        Ok(())
    }

    /// Full invariant check against the problem dimensions.
    pub fn validate(&self, points: usize, cells: usize, patterns: usize) -> Result<()> {
        if self.pi.len() != patterns {
            return Err(Error::Dimension(format!("{} pattern shares for {patterns} patterns", self.pi.len())));
        }
        if let Some(&(k, b, _)) = self.alpha.keys().find(|&&(k, b, _)| k >= points || b >= cells) {
            return Err(Error::Dimension(format!("allocation entry (k={k}, b={b}) out of range")));
        }
        self.check_shape_free()?;
        for (b, r) in self.rho(cells).iter().enumerate() {
            if *r > 1.0 + ALLOCATION_TOLERANCE {
                return Err(Error::Domain(format!("cell {b} usage {r} exceeds 1")));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> &BTreeMap<(usize, usize, usize), f64> {
        &self.alpha
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn get(&self, k: usize, b: usize, i: usize) -> f64 {
        self.alpha.get(&(k, b, i)).copied().unwrap_or(0.0)
    }

    /// Per-cell usage `ρ_b = Σ_{k,i} α_kbi`.
    pub fn rho(&self, cells: usize) -> Vec<f64> {
        let mut rho = vec![0.0; cells];
        for (&(_, b, _), &v) in &self.alpha {
            rho[b] += v;
        }
        rho
    }

    /// Per-point total rate `R_k = Σ_{b,i} α_kbi·r_kbi`.
    pub fn point_rates(&self, rates: &RateTable) -> Vec<f64> {
        let mut out = vec![0.0; rates.points()];
        for (&(k, b, i), &v) in &self.alpha {
            out[k] += v * rates.get(k, b, i);
        }
        out
    }

    /// `Σ_i α_kbi` as a K×B matrix.
    pub fn served_share(&self, points: usize, cells: usize) -> Vec<Vec<f64>> {
        let mut s = vec![vec![0.0; cells]; points];
        for (&(k, b, _), &v) in &self.alpha {
            s[k][b] += v;
        }
        s
    }

    /// Number of patterns with share above [`PATTERN_TOLERANCE`].
    pub fn active_patterns(&self) -> usize {
        self.pi.iter().filter(|&&p| p > PATTERN_TOLERANCE).count()
    }

    /// Convex combination `Σ_j w_j·parts_j`. Weights are expected to be
    /// non-negative and sum to one.
    pub(crate) fn combine(parts: &[(f64, &Allocation)], patterns: usize) -> Allocation {
        let mut alpha: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
        let mut pi = vec![0.0; patterns];
        for &(w, a) in parts {
            if w <= 0.0 {
                continue;
            }
            for (key, &v) in &a.alpha {
                *alpha.entry(*key).or_default() += w * v;
            }
            for (p, &x) in pi.iter_mut().zip(&a.pi) {
                *p += w * x;
            }
        }
        alpha.retain(|_, v| *v > 0.0);
        Allocation { alpha, pi }
    }

    /// Rename point indices through `map` (new index = `map[old]`).
    pub(crate) fn remap_points(&self, map: &[usize]) -> Allocation {
        Allocation {
            alpha: self.alpha.iter().map(|(&(k, b, i), &v)| ((map[k], b, i), v)).collect(),
            pi: self.pi.clone(),
        }
    }

    /// Drop every entry of the listed cells.
    pub(crate) fn without_cells(&self, cells: &[usize]) -> Allocation {
        Allocation {
            alpha: self.alpha.iter().filter(|(&(_, b, _), _)| !cells.contains(&b)).map(|(k, v)| (*k, *v)).collect(),
            pi: self.pi.clone(),
        }
    }
}

/// Outcome of the closed-form inner minimization: one pattern, at most one
/// point per cell.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PricingChoice {
    pub pattern: usize,
    /// `(cell, point)` pairs that receive the whole pattern share.
    pub served: Vec<(usize, usize)>,
    pub value: f64,
}

impl PricingChoice {
    pub fn allocation(&self, patterns: usize) -> Allocation {
        let mut pi = vec![0.0; patterns];
        pi[self.pattern] = 1.0;
        let alpha = self.served.iter().map(|&(b, k)| ((k, b, self.pattern), 1.0)).collect();
        Allocation { alpha, pi }
    }
}

/// Minimize `Σ_{k,b,i} α_kbi·(offset_b − r_kbi·factor_k)` over the feasible
/// allocation set. Per (cell, pattern) the best point maximizes `r·factor`;
/// it is served only when its reduced value is strictly negative. The pattern
/// with the smallest total wins; ties go to the lowest index throughout.
pub(crate) fn closed_form_pricing(rates: &RateTable, offset: &[f64], factor: &[f64]) -> PricingChoice {
    let mut best: Option<PricingChoice> = None;
    let mut served = Vec::with_capacity(rates.cells());
    for i in 0..rates.patterns() {
        served.clear();
        let mut total = 0.0;
        for (b, &o) in offset.iter().enumerate() {
            let col = rates.column(b, i);
            let mut top = 0.0;
            let mut arg = None;
            for (k, (&r, &f)) in col.iter().zip(factor).enumerate() {
                let v = r * f;
                if v > top {
                    top = v;
                    arg = Some(k);
                }
            }
            if let Some(k) = arg {
                let reduced = o - top;
                if reduced < 0.0 {
                    total += reduced;
                    served.push((b, k));
                }
            }
        }
        if best.as_ref().is_none_or(|c| total < c.value) {
            best = Some(PricingChoice { pattern: i, served: served.clone(), value: total });
        }
    }
    best.expect("rate table has at least one pattern")
}

/// Closed-form evaluation of the balancing dual function at `lambda`.
///
/// Returns the minimizing allocation (a single pattern with share 1) and the
/// dual value `g = Σ −r_kbi·λ_k/β_k` over the chosen entries.
pub fn price_cut(lambda: &[f64], rates: &RateTable, beta: &[f64]) -> Result<(Allocation, f64)> {
    if lambda.len() != rates.points() || beta.len() != rates.points() {
        return Err(Error::Dimension("multiplier and demand vectors must match the point count".into()));
    }
    if beta.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Precondition("normalized demands must be positive".into()));
    }
    let factor: Vec<f64> = lambda.iter().zip(beta).map(|(l, b)| l / b).collect();
    let choice = closed_form_pricing(rates, &vec![0.0; rates.cells()], &factor);
    Ok((choice.allocation(rates.patterns()), choice.value))
}

/// Cuts of the balancing master problem: cut `j` reads
/// `z + Σ_k c_j[k]·λ_k ≤ 0` with `c_j[k] = Σ_{b,i} α^(j)_kbi·r_kbi/β_k`.
#[derive(Debug, Clone)]
pub struct CutCollection {
    beta: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    points: Vec<Allocation>,
}

impl CutCollection {
    pub fn new(beta: Vec<f64>) -> Self {
        CutCollection { beta, coeffs: Vec::new(), points: Vec::new() }
    }

    pub fn add(&mut self, alloc: Allocation, rates: &RateTable) {
        let c = alloc.point_rates(rates).iter().zip(&self.beta).map(|(r, b)| r / b).collect();
        self.coeffs.push(c);
        self.points.push(alloc);
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    pub fn points(&self) -> &[Allocation] {
        &self.points
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    pub lambda: Vec<f64>,
    pub z: f64,
    /// Multipliers of the cut constraints; non-negative, summing to one.
    pub kappa: Vec<f64>,
}

/// Clip tiny negative round-off and renormalize onto the simplex.
pub(crate) fn to_simplex(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total > 0.0 {
        clipped.iter().map(|x| x / total).collect()
    } else {
        let mut e = vec![0.0; v.len()];
        if let Some(first) = e.first_mut() {
            *first = 1.0;
        }
        e
    }
}

/// Maximize `z` over `λ` on the simplex subject to every stored cut.
pub fn master_step(cuts: &CutCollection) -> Result<MasterSolution> {
    if cuts.is_empty() {
        return Err(Error::Precondition("master problem needs at least one cut".into()));
    }
    let mut master = BalanceMaster::new(cuts.beta.len(), &cuts.coeffs[0])?;
    for c in &cuts.coeffs[1..] {
        master.add_cut(c)?;
    }
    master.solve()
}

/// The balancing master written over cut weights κ:
/// `max R` s.t. `Σ_j κ_j c_j[k] ≥ R` for all k, `Σ_j κ_j = 1`, `κ, R ≥ 0`.
/// Its row duals are the multipliers `λ` and its optimal value is `−z`; each
/// cut adds one column, so re-solves start from the previous basis.
///
/// `R ≥ 0` is harmless since cut coefficients are non-negative.
pub(crate) struct BalanceMaster {
    lp: lpcore::ColumnSimplex,
    points: usize,
    /// Column index of the first cut; earlier columns are surplus and `R`.
    first_cut: usize,
}

impl BalanceMaster {
    pub(crate) fn new(points: usize, first: &[f64]) -> Result<Self> {
        let mut b = vec![0.0; points + 1];
        b[points] = 1.0;
        let mut lp = lpcore::ColumnSimplex::new(b)?;
        for k in 0..points {
            let mut col = vec![0.0; points + 1];
            col[k] = -1.0;
            lp.add_column(0.0, col)?;
        }
        let mut col = vec![-1.0; points + 1];
        col[points] = 0.0;
        lp.add_column(-1.0, col)?;
        let mut master = BalanceMaster { lp, points, first_cut: points + 1 };
        let j = master.add_cut(first)?;
        let mut basis: Vec<usize> = (0..points).collect();
        basis.push(j);
        master.lp.set_basis(basis)?;
        Ok(master)
    }

    pub(crate) fn add_cut(&mut self, c: &[f64]) -> Result<usize> {
        let mut col = c.to_vec();
        col.push(1.0);
        Ok(self.lp.add_column(0.0, col)?)
    }

    pub(crate) fn solve(&mut self) -> Result<MasterSolution> {
        let status = self.lp.solve()?;
        if status != lpcore::LpStatus::Optimal {
            return Err(Error::Solver { stage: "balancing master", status: status.to_string() });
        }
        let y = self.lp.duals();
        let x = self.lp.x();
        Ok(MasterSolution {
            lambda: to_simplex(&y[..self.points]),
            z: self.lp.value(),
            kappa: to_simplex(&x[self.first_cut..]),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalancerConfig {
    /// Relative tolerance of the stopping test `g ≥ z − tol·(1 + |z|)`.
    pub tol: f64,
    /// Iteration cap; `None` means `10·(K + B)`.
    pub max_iters: Option<usize>,
    /// Seed for the random initial pattern.
    pub seed: u64,
}

impl Default for BalancerConfig {
    fn default() -> Self {
        BalancerConfig { tol: 1e-9, max_iters: None, seed: 0 }
    }
}

/// Upper (`z`) and lower (`g`) bounds on the dual optimum at one iteration,
/// in bit/s with the sign convention of the minimized dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub z: f64,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceOutcome {
    pub allocation: Allocation,
    /// Balanced total rate of the recovered allocation (bit/s).
    pub r_sum_star: f64,
    /// Dual bound `−z` at termination (bit/s).
    pub dual_bound: f64,
    pub point_rates: Vec<f64>,
    pub lambda: Vec<f64>,
    pub trace: Vec<Bracket>,
    pub iterations: usize,
    /// Cut points with positive master multiplier, as (weight, allocation);
    /// `allocation` is their weighted sum.
    pub components: Vec<(f64, Allocation)>,
}

/// Initial cut: one random pattern, each point on its strongest active cell,
/// each cell splitting the pattern share equally among its points.
fn initial_allocation(rates: &RateTable, rng: &mut ChaCha8Rng) -> Allocation {
    let i = rng.random_range(0..rates.patterns());
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); rates.cells()];
    for k in 0..rates.points() {
        let mut best = 0.0;
        let mut arg = None;
        for b in 0..rates.cells() {
            let r = rates.get(k, b, i);
            if r > best {
                best = r;
                arg = Some(b);
            }
        }
        if let Some(b) = arg {
            members[b].push(k);
        }
    }
    let mut alpha = BTreeMap::new();
    for (b, ks) in members.iter().enumerate() {
        for &k in ks {
            alpha.insert((k, b, i), 1.0 / ks.len() as f64);
        }
    }
    let mut pi = vec![0.0; rates.patterns()];
    pi[i] = 1.0;
    Allocation { alpha, pi }
}

/// Solve the rate-balancing problem.
///
/// Points with zero demand are excluded from the balancing and come back
/// with no allocation (`R_k = 0`).
pub fn rate_balance(rates: &RateTable, demand: &DemandProfile, cfg: &BalancerConfig) -> Result<BalanceOutcome> {
    if demand.len() != rates.points() {
        return Err(Error::Dimension(format!(
            "{} demands for {} test points",
            demand.len(),
            rates.points()
        )));
    }
    let beta_full = demand.beta()?;
    let keep: Vec<usize> = (0..demand.len()).filter(|&k| demand.demands()[k] > 0.0).collect();
    let beta: Vec<f64> = keep.iter().map(|&k| beta_full[k]).collect();
    let reduced = rates.select_points(&keep);
    let r_max = reduced.max_rate();
    if r_max == 0.0 {
        return Ok(BalanceOutcome {
            allocation: Allocation::empty(rates.patterns()),
            r_sum_star: 0.0,
            dual_bound: 0.0,
            point_rates: vec![0.0; rates.points()],
            lambda: vec![0.0; rates.points()],
            trace: Vec::new(),
            iterations: 0,
            components: Vec::new(),
        });
    }
    let scaled = reduced.scaled(1.0 / r_max);
    let cap = cfg.max_iters.unwrap_or(10 * (keep.len() + rates.cells()));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cuts = CutCollection::new(beta.clone());
    cuts.add(initial_allocation(&scaled, &mut rng), &scaled);
    let mut master = BalanceMaster::new(beta.len(), &cuts.coeffs[0])?;

    let mut trace = Vec::new();
    let mut last_gap = f64::INFINITY;
    for iter in 1..=cap {
        let m = master.solve()?;
        let (alloc, g) = price_cut(&m.lambda, &scaled, &beta)?;
        trace.push(Bracket { z: m.z * r_max, g: g * r_max });
        last_gap = m.z - g;
        if g >= m.z - cfg.tol * (1.0 + m.z.abs()) {
            let parts: Vec<(f64, &Allocation)> = m.kappa.iter().copied().zip(cuts.points()).collect();
            let recovered = Allocation::combine(&parts, rates.patterns());
            let reduced_rates = recovered.point_rates(&scaled);
            let balanced = reduced_rates
                .iter()
                .zip(&beta)
                .map(|(r, b)| r / b)
                .fold(f64::INFINITY, f64::min);
            let allocation = recovered.remap_points(&keep);
            let components = m
                .kappa
                .iter()
                .zip(cuts.points())
                .filter(|(w, _)| **w > 0.0)
                .map(|(w, a)| (*w, a.remap_points(&keep)))
                .collect();
            let point_rates = allocation.point_rates(rates);
            let mut lambda = vec![0.0; rates.points()];
            for (j, &k) in keep.iter().enumerate() {
                lambda[k] = m.lambda[j];
            }
            log::debug!("rate balancing converged after {iter} iterations");
            return Ok(BalanceOutcome {
                allocation,
                r_sum_star: balanced * r_max,
                dual_bound: -m.z * r_max,
                point_rates,
                lambda,
                trace,
                iterations: iter,
                components,
            });
        }
        cuts.add(alloc, &scaled);
        master.add_cut(cuts.coeffs.last().expect("cut just added"))?;
    }
    Err(Error::Convergence { stage: "rate balancing", iterations: cap, gap: last_gap * r_max })
}

/// Demand is servable iff the balanced rate reaches the total demand
/// (relative tolerance 1e-9).
pub fn is_feasible(r_sum_star: f64, demand: &DemandProfile) -> bool {
    let total = demand.total();
    r_sum_star >= total * (1.0 - 1e-9)
}
