//! Rate-constrained energy minimization.
//!
//! The ℓ0 activity term of the power model is smoothed by a logarithm and
//! minimized by iterative reweighting: every outer iteration solves a
//! weighted usage minimization `min Σ_b w_b·ρ_b` subject to all rate demands,
//! then refreshes the weights from the new usage. Each weighted problem is
//! solved through its Lagrangian dual with Kelley cuts, using the same
//! closed-form pricing structure as the rate balancer.

use serde::{Deserialize, Serialize};

use crate::balancer::{
    closed_form_pricing, is_feasible, rate_balance, to_simplex, Allocation, BalancerConfig, Bracket,
    DemandProfile,
};
use crate::lpcore;
use crate::netmodel::{total_power_with_threshold, NetworkTopology, RateTable};
use crate::{Error, Result, ACTIVITY_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergyConfig {
    /// Smoothing constant of the logarithmic ℓ0 surrogate.
    pub epsilon: f64,
    pub max_outer_iters: usize,
    /// Relative tolerance of the inner stopping test `h ≥ z − tol·(1 + |z|)`.
    pub inner_tol: f64,
    /// Inner iteration cap; `None` means `20·(K + B) + 100`.
    pub max_inner_iters: Option<usize>,
    /// Outer stop: relative change of the smoothed objective.
    pub outer_tol: f64,
    pub activity_threshold: f64,
    /// Multiplier box `μ_k ≤ factor·max w / min positive r` of the inner
    /// master problem.
    pub mu_bound_factor: f64,
    pub balancer: BalancerConfig,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            epsilon: 1e-6,
            max_outer_iters: 10,
            inner_tol: 1e-9,
            max_inner_iters: None,
            outer_tol: 1e-5,
            activity_threshold: ACTIVITY_THRESHOLD,
            mu_bound_factor: 1e9,
            balancer: BalancerConfig::default(),
        }
    }
}

impl EnergyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("at least one outer iteration is required".into()));
        }
        if !(self.inner_tol > 0.0 && self.outer_tol >= 0.0 && self.activity_threshold >= 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        if !(self.mu_bound_factor > 0.0) {
            return Err(Error::Config("multiplier bound factor must be positive".into()));
        }
        Ok(())
    }
}

/// Per-cell usage weights (W per unit usage).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Domain("weights must be finite and positive".into()));
        }
        Ok(WeightVector(w))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, rho: &[f64]) -> f64 {
        self.0.iter().zip(rho).map(|(w, r)| w * r).sum()
    }
}

/// First outer iteration: `w_b = P_b^OP`.
pub fn initial_weights(topo: &NetworkTopology) -> WeightVector {
    WeightVector(topo.op_power())
}

/// Gradient of the smoothed objective at `rho_prev`:
/// `w_b = (1−q_b)·P_b + q_b·P_b / (ln(1+1/ε)·(ε+ρ_b))`.
pub fn update_weights(rho_prev: &[f64], topo: &NetworkTopology, cfg: &EnergyConfig) -> Result<WeightVector> {
    if rho_prev.len() != topo.len() {
        return Err(Error::Dimension("usage vector length differs from cell count".into()));
    }
    let eps = cfg.epsilon;
    let norm = (1.0 + 1.0 / eps).ln();
    let w = rho_prev
        .iter()
        .zip(topo.cells())
        .map(|(&r, c)| {
            if !(-1e-9..=1.0 + 1e-9).contains(&r) {
                return Err(Error::Domain(format!("usage {r} outside [0, 1]")));
            }
            let q = c.fixed_fraction;
            let p = c.op_power_max_w;
            Ok((1.0 - q) * p + q * p / (norm * (eps + r.max(0.0))))
        })
        .collect::<Result<Vec<f64>>>()?;
    WeightVector::new(w)
}

/// Smoothed power objective
/// `Σ_b (1−q_b)·P_b·ρ_b + q_b·P_b·ln(1+ρ_b/ε)/ln(1+1/ε)`.
pub fn smoothed_objective(rho: &[f64], topo: &NetworkTopology, epsilon: f64) -> f64 {
    let norm = (1.0 + 1.0 / epsilon).ln();
    rho.iter()
        .zip(topo.cells())
        .map(|(&r, c)| {
            let r = r.max(0.0);
            let q = c.fixed_fraction;
            let p = c.op_power_max_w;
            (1.0 - q) * p * r + q * p * (1.0 + r / epsilon).ln() / norm
        })
        .sum()
}

/// Closed-form evaluation of the weighted problem's dual function at `mu`.
///
/// Returns the minimizing allocation and `h = Σ min(0, w_b − r_kbi·μ_k) +
/// Σ_k d_k·μ_k` over the chosen entries.
pub fn price_cut_energy(
    mu: &[f64],
    w: &WeightVector,
    rates: &RateTable,
    demand: &[f64],
) -> Result<(Allocation, f64)> {
    if mu.len() != rates.points() || demand.len() != rates.points() {
        return Err(Error::Dimension("multiplier and demand vectors must match the point count".into()));
    }
    if w.len() != rates.cells() {
        return Err(Error::Dimension("weight vector length differs from cell count".into()));
    }
    if mu.iter().any(|m| !(*m >= 0.0)) {
        return Err(Error::Domain("multipliers must be >= 0".into()));
    }
    let choice = closed_form_pricing(rates, w.values(), mu);
    let constant: f64 = demand.iter().zip(mu).map(|(d, m)| d * m).sum();
    Ok((choice.allocation(rates.patterns()), choice.value + constant))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOutcome {
    pub allocation: Allocation,
    /// `Σ_b w_b·ρ_b` of the recovered allocation.
    pub objective: f64,
    /// Dual bound at termination.
    pub dual_bound: f64,
    pub mu: Vec<f64>,
    pub trace: Vec<Bracket>,
    /// Master solves performed.
    pub iterations: usize,
    /// Cuts in the master at termination (seed cuts included).
    pub cuts: usize,
}

struct EnergyCut {
    cost: f64,
    rates: Vec<f64>,
    alloc: Allocation,
}

/// Solve `min Σ w_b ρ_b` subject to `R_k ≥ d_k` from a feasible start.
pub fn solve_weighted_l1(
    w: &WeightVector,
    rates: &RateTable,
    demand: &DemandProfile,
    init: &Allocation,
    cfg: &EnergyConfig,
) -> Result<WeightedOutcome> {
    solve_weighted_l1_seeded(w, rates, demand, &[(1.0, init.clone())], cfg)
}

/// As [`solve_weighted_l1`], with the start given as a convex combination of
/// seed allocations. Every seed enters the master problem as its own cut;
/// only the combination has to meet the demands.
pub fn solve_weighted_l1_seeded(
    w: &WeightVector,
    rates: &RateTable,
    demand: &DemandProfile,
    seeds: &[(f64, Allocation)],
    cfg: &EnergyConfig,
) -> Result<WeightedOutcome> {
    cfg.validate()?;
    if demand.len() != rates.points() || w.len() != rates.cells() {
        return Err(Error::Dimension("weights, demands and rate table disagree in shape".into()));
    }
    let keep: Vec<usize> = (0..demand.len()).filter(|&k| demand.demands()[k] > 0.0).collect();
    if keep.is_empty() {
        return Ok(WeightedOutcome {
            allocation: Allocation::empty(rates.patterns()),
            objective: 0.0,
            dual_bound: 0.0,
            mu: vec![0.0; rates.points()],
            trace: Vec::new(),
            iterations: 0,
            cuts: 0,
        });
    }
    if seeds.is_empty() {
        return Err(Error::Precondition("weighted solve needs a starting allocation".into()));
    }

    // Check the start against the demands in original units.
    let start = Allocation::combine(
        &seeds.iter().map(|(c, a)| (*c, a)).collect::<Vec<_>>(),
        rates.patterns(),
    );
    let start_rates = start.point_rates(rates);
    for &k in &keep {
        let d = demand.demands()[k];
        if start_rates[k] < d * (1.0 - 1e-9) {
            return Err(Error::Precondition(format!(
                "starting allocation gives point {k} {:.6e} bit/s of {d:.6e} required",
                start_rates[k]
            )));
        }
    }

    let mut inverse = vec![usize::MAX; rates.points()];
    for (j, &k) in keep.iter().enumerate() {
        inverse[k] = j;
    }
    let reduced = rates.select_points(&keep);
    let r_max = reduced.max_rate();
    let w_max = w.values().iter().copied().fold(0.0, f64::max);
    let scaled = reduced.scaled(1.0 / r_max);
    let w_hat = WeightVector(w.values().iter().map(|v| v / w_max).collect());
    let d_hat: Vec<f64> = keep.iter().map(|&k| demand.demands()[k] / r_max).collect();
    let kk = keep.len();
    let cells = rates.cells();

    let mut min_rate = f64::INFINITY;
    for i in 0..scaled.patterns() {
        for b in 0..cells {
            for &r in scaled.column(b, i) {
                if r > 0.0 && r < min_rate {
                    min_rate = r;
                }
            }
        }
    }
    let mu_bound = cfg.mu_bound_factor * 1.0 / min_rate;

    let make_cut = |alloc: Allocation| -> EnergyCut {
        let cost = w_hat.dot(&alloc.rho(cells));
        let rates = alloc.point_rates(&scaled);
        EnergyCut { cost, rates, alloc }
    };
    let reduce = |a: &Allocation| {
        Allocation::from_parts_unchecked(
            a.alpha()
                .iter()
                .filter(|(&(k, _, _), _)| inverse[k] != usize::MAX)
                .map(|(&(k, b, i), &v)| ((inverse[k], b, i), v))
                .collect(),
            a.pi().to_vec(),
        )
    };
    // The combined start is itself a point of the feasible set and seeds the
    // master's starting basis; the individual seeds follow as extra cuts.
    let mut cuts: Vec<EnergyCut> = vec![make_cut(reduce(&start))];
    if seeds.len() > 1 {
        cuts.extend(seeds.iter().map(|(_, a)| make_cut(reduce(a))));
    }
    let mut master = EnergyMaster::new(&cuts[0], &d_hat, mu_bound)?;
    for cut in &cuts[1..] {
        master.add_cut(cut, &d_hat)?;
    }

    let cap = cfg.max_inner_iters.unwrap_or(20 * (kk + cells) + 100);
    let mut trace = Vec::new();
    let mut last_gap = f64::INFINITY;
    for iter in 1..=cap {
        let (mu, z, kappa) = master.solve()?;
        let (alloc, h) = price_cut_energy(&mu, &w_hat, &scaled, &d_hat)?;
        trace.push(Bracket { z: z * w_max, g: h * w_max });
        last_gap = z - h;
        if h >= z - cfg.inner_tol * (1.0 + z.abs()) {
            if let Some(k) = mu.iter().position(|&m| m >= mu_bound * (1.0 - 1e-9)) {
                return Err(Error::Solver {
                    stage: "energy master",
                    status: format!("multiplier box active at termination (point {})", keep[k]),
                });
            }
            let parts: Vec<(f64, &Allocation)> = kappa.iter().copied().zip(cuts.iter().map(|c| &c.alloc)).collect();
            let allocation = Allocation::combine(&parts, rates.patterns()).remap_points(&keep);
            let objective = w.dot(&allocation.rho(cells));
            let mut mu_full = vec![0.0; rates.points()];
            for (j, &k) in keep.iter().enumerate() {
                mu_full[k] = mu[j] * w_max / r_max;
            }
            return Ok(WeightedOutcome {
                allocation,
                objective,
                dual_bound: z * w_max,
                mu: mu_full,
                trace,
                iterations: iter,
                cuts: cuts.len(),
            });
        }
        let cut = make_cut(alloc);
        master.add_cut(&cut, &d_hat)?;
        cuts.push(cut);
    }
    Err(Error::Convergence { stage: "weighted usage minimization", iterations: cap, gap: last_gap * w_max })
}

/// The energy master written over cut weights κ:
/// `min Σ_j κ_j W_j + U·Σ_k s_k` s.t. `Σ_j κ_j (a_j[k] − d_k) + s_k ≥ 0`,
/// `Σ_j κ_j = 1`, `κ, s ≥ 0`, with `W_j` the weighted usage of cut `j`.
/// Its row duals are the multipliers `μ` (the `s` columns carry the box
/// `μ ≤ U`) and its optimal value is `z`.
struct EnergyMaster {
    lp: lpcore::ColumnSimplex,
    points: usize,
    /// Columns `0..K` are surpluses, `K..2K` the box slacks `s`.
    first_cut: usize,
}

impl EnergyMaster {
    fn new(start: &EnergyCut, d_hat: &[f64], mu_bound: f64) -> Result<Self> {
        let kk = d_hat.len();
        let mut b = vec![0.0; kk + 1];
        b[kk] = 1.0;
        let mut lp = lpcore::ColumnSimplex::new(b)?;
        for sign in [-1.0, 1.0] {
            for k in 0..kk {
                let mut col = vec![0.0; kk + 1];
                col[k] = sign;
                lp.add_column(if sign > 0.0 { mu_bound } else { 0.0 }, col)?;
            }
        }
        let mut master = EnergyMaster { lp, points: kk, first_cut: 2 * kk };
        let j = master.add_cut(start, d_hat)?;
        // Points the start serves exactly (or short by round-off) rest on
        // their box slack instead of the surplus.
        let mut basis: Vec<usize> =
            (0..kk).map(|k| if start.rates[k] - d_hat[k] >= 0.0 { k } else { kk + k }).collect();
        basis.push(j);
        master.lp.set_basis(basis)?;
        Ok(master)
    }

    fn add_cut(&mut self, cut: &EnergyCut, d_hat: &[f64]) -> Result<usize> {
        let mut col: Vec<f64> = cut.rates.iter().zip(d_hat).map(|(a, d)| a - d).collect();
        col.push(1.0);
        Ok(self.lp.add_column(cut.cost, col)?)
    }

    /// `(μ, z, κ)` at the master optimum.
    fn solve(&mut self) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let status = self.lp.solve()?;
        if status != lpcore::LpStatus::Optimal {
            return Err(Error::Solver { stage: "energy master", status: status.to_string() });
        }
        let y = self.lp.duals();
        let mu = y[..self.points].iter().map(|m| m.max(0.0)).collect();
        let kappa = to_simplex(&self.lp.x()[self.first_cut..]);
        Ok((mu, self.lp.value(), kappa))
    }
}

/// Result of one energy-minimization run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub feasible: bool,
    pub allocation: Allocation,
    pub rho: Vec<f64>,
    pub p_tot_w: f64,
    pub active_cells: Vec<usize>,
    pub active_patterns: usize,
    pub point_rates: Vec<f64>,
    /// `association[k][b] = 1` iff cell `b` serves point `k`.
    pub association: Vec<Vec<u8>>,
    /// Mean number of serving cells over points with positive demand.
    pub avg_serving_cells: f64,
    /// Smoothed objective after each outer iteration.
    pub objective_trace: Vec<f64>,
    pub outer_iters: usize,
    pub converged: bool,
    pub r_sum_star: f64,
    /// Cuts in the master problem of the final weighted solve.
    pub final_inner_cuts: usize,
}

impl SolveReport {
    fn build(
        feasible: bool,
        allocation: Allocation,
        topo: &NetworkTopology,
        rates: &RateTable,
        demand: &DemandProfile,
        threshold: f64,
    ) -> Result<SolveReport> {
        let rho: Vec<f64> = allocation.rho(topo.len()).iter().map(|r| r.clamp(0.0, 1.0)).collect();
        let p_tot_w = total_power_with_threshold(&rho, topo, threshold)?;
        let active_cells = (0..topo.len()).filter(|&b| rho[b] > threshold).collect();
        let association = extract_association(&allocation, rates.points(), topo.len(), threshold);
        let served: Vec<usize> = (0..rates.points()).filter(|&k| demand.demands()[k] > 0.0).collect();
        let avg_serving_cells = if served.is_empty() {
            0.0
        } else {
            served.iter().map(|&k| association[k].iter().map(|&s| s as usize).sum::<usize>()).sum::<usize>()
                as f64
                / served.len() as f64
        };
        Ok(SolveReport {
            feasible,
            active_patterns: allocation.active_patterns(),
            point_rates: allocation.point_rates(rates),
            allocation,
            rho,
            p_tot_w,
            active_cells,
            association,
            avg_serving_cells,
            objective_trace: Vec::new(),
            outer_iters: 0,
            converged: true,
            r_sum_star: 0.0,
            final_inner_cuts: 0,
        })
    }
}

/// Report for demands that cannot be met: empty allocation, zero power.
pub(crate) fn infeasible_report(
    topo: &NetworkTopology,
    rates: &RateTable,
    demand: &DemandProfile,
    threshold: f64,
    r_sum_star: f64,
) -> Result<SolveReport> {
    let mut report = SolveReport::build(false, Allocation::empty(rates.patterns()), topo, rates, demand, threshold)?;
    report.r_sum_star = r_sum_star;
    Ok(report)
}

/// `s_kb = 1` iff `Σ_i α_kbi > threshold`.
pub fn extract_association(alloc: &Allocation, points: usize, cells: usize, threshold: f64) -> Vec<Vec<u8>> {
    alloc
        .served_share(points, cells)
        .into_iter()
        .map(|row| row.into_iter().map(|v| u8::from(v > threshold)).collect())
        .collect()
}

/// Full energy-minimization pipeline: feasibility check by rate balancing,
/// then reweighted usage minimization started from the balancing solution.
pub fn minimize_energy(
    topo: &NetworkTopology,
    rates: &RateTable,
    demand: &DemandProfile,
    cfg: &EnergyConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    if rates.cells() != topo.len() || demand.len() != rates.points() {
        return Err(Error::Dimension(format!(
            "topology has {} cells, rate table {}x{}, demand vector {}",
            topo.len(),
            rates.points(),
            rates.cells(),
            demand.len()
        )));
    }
    let thr = cfg.activity_threshold;
    if demand.total() == 0.0 {
        return SolveReport::build(true, Allocation::empty(rates.patterns()), topo, rates, demand, thr);
    }

    let bal = rate_balance(rates, demand, &cfg.balancer)?;
    if !is_feasible(bal.r_sum_star, demand) {
        return infeasible_report(topo, rates, demand, thr, bal.r_sum_star);
    }
    if bal.r_sum_star <= demand.total() * (1.0 + 1e-9) {
        // Boundary case: the balanced allocation is the only feasible one.
        let mut report = SolveReport::build(true, bal.allocation, topo, rates, demand, thr)?;
        report.r_sum_star = bal.r_sum_star;
        return Ok(report);
    }

    let mut w = initial_weights(topo);
    let mut current: Option<Allocation> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut final_cuts = 0;
    for t in 1..=cfg.max_outer_iters {
        let res = solve_weighted_l1_seeded(&w, rates, demand, &bal.components, cfg)?;
        final_cuts = res.cuts;
        let mut next = res.allocation;
        if let Some(prev) = &current {
            // Majorization step must not lose against the previous iterate.
            if w.dot(&next.rho(topo.len())) > w.dot(&prev.rho(topo.len())) {
                next = prev.clone();
            }
        }
        let rho = next.rho(topo.len());
        let f = smoothed_objective(&rho, topo, cfg.epsilon);
        log::debug!("outer iteration {t}: smoothed objective {f:.9e}");
        let prev_f = trace.last().copied();
        trace.push(f);
        current = Some(next);
        if let Some(pf) = prev_f {
            if (pf - f).abs() <= cfg.outer_tol * pf.abs().max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if t < cfg.max_outer_iters {
            let clamped: Vec<f64> = rho.iter().map(|r| r.clamp(0.0, 1.0)).collect();
            w = update_weights(&clamped, topo, cfg)?;
        }
    }
    let mut alloc = current.expect("at least one outer iteration ran");

    // Switch off cells left with sub-threshold usage when the demands
    // remain met without them.
    let rho = alloc.rho(topo.len());
    let idle: Vec<usize> = (0..topo.len()).filter(|&b| rho[b] > 0.0 && rho[b] <= thr).collect();
    if !idle.is_empty() {
        let pruned = alloc.without_cells(&idle);
        let ok = pruned.point_rates(rates).iter().zip(demand.demands()).all(|(r, d)| *r >= *d);
        if ok {
            alloc = pruned;
        }
    }

    let mut report = SolveReport::build(true, alloc, topo, rates, demand, thr)?;
    report.objective_trace = trace;
    report.outer_iters = report.objective_trace.len();
    report.converged = converged;
    report.r_sum_star = bal.r_sum_star;
    report.final_inner_cuts = final_cuts;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Cell, Position};

    fn macro_pico() -> NetworkTopology {
        NetworkTopology::new(vec![
            Cell::macro_cell(1, Position::new(0.0, 0.0)),
            Cell::pico_cell(2, Position::new(200.0, 0.0)),
        ])
        .unwrap()
    }

    #[test]
    fn weights_without_fixed_part_equal_op_power() {
        let topo = NetworkTopology::new(vec![Cell { fixed_fraction: 1e-300, ..Cell::pico_cell(1, Position::default()) }])
            .unwrap();
        let w = update_weights(&[0.4], &topo, &EnergyConfig::default()).unwrap();
        assert!((w.values()[0] - 38.0).abs() < 1e-6);
    }

    #[test]
    fn weight_values() {
        let topo = NetworkTopology::new(vec![Cell::macro_cell(1, Position::default())]).unwrap();
        let cfg = EnergyConfig::default();
        let full = update_weights(&[1.0], &topo, &cfg).unwrap().values()[0];
        let ln = (1.0f64 + 1e6).ln();
        assert!((ln - 13.815_511).abs() < 1e-5);
        assert!((full - 439.0 / (ln * (1.0 + 1e-6))).abs() < 1e-9);
        let off = update_weights(&[0.0], &topo, &cfg).unwrap().values()[0];
        assert!((off - 439.0 / (ln * 1e-6)).abs() / off < 1e-12);
        assert!(update_weights(&[1.5], &topo, &cfg).is_err());
    }

    #[test]
    fn zero_multipliers_price_to_nothing() {
        let r = RateTable::from_nested(&[vec![vec![5.0], vec![3.0]]]).unwrap();
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap();
        let (a, h) = price_cut_energy(&[0.0], &w, &r, &[1.0]).unwrap();
        assert!(a.alpha().is_empty());
        assert_eq!(h, 0.0);
    }

    #[test]
    fn single_negative_entry_is_served() {
        let r = RateTable::from_nested(&[vec![vec![5.0], vec![3.0]]]).unwrap();
        let w = WeightVector::new(vec![1.0, 2.0]).unwrap();
        // Reduced values: 1 − 5·0.3 = −0.5, 2 − 3·0.3 = 1.1.
        let (a, h) = price_cut_energy(&[0.3], &w, &r, &[2.0]).unwrap();
        assert_eq!(a.get(0, 0, 0), 1.0);
        assert_eq!(a.alpha().len(), 1);
        assert!((h - (-0.5 + 0.6)).abs() < 1e-12);
    }

    #[test]
    fn forced_single_link() {
        let r = RateTable::from_nested(&[vec![vec![4e6]]]).unwrap();
        let w = WeightVector::new(vec![38.0]).unwrap();
        let d = DemandProfile::new(vec![1e6]).unwrap();
        let full = {
            let mut alpha = std::collections::BTreeMap::new();
            alpha.insert((0, 0, 0), 1.0);
            Allocation::from_parts(alpha, vec![1.0]).unwrap()
        };
        let out = solve_weighted_l1(&w, &r, &d, &full, &EnergyConfig::default()).unwrap();
        assert!((out.allocation.get(0, 0, 0) - 0.25).abs() < 1e-9);
        assert!((out.objective - 38.0 * 0.25).abs() < 1e-7);
    }

    #[test]
    fn infeasible_start_rejected() {
        let r = RateTable::from_nested(&[vec![vec![4e6]]]).unwrap();
        let w = WeightVector::new(vec![38.0]).unwrap();
        let d = DemandProfile::new(vec![1e6]).unwrap();
        let err = solve_weighted_l1(&w, &r, &d, &Allocation::empty(1), &EnergyConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn zero_demand_is_free() {
        let topo = macro_pico();
        let r = RateTable::from_nested(&[vec![vec![1e6], vec![2e6]]]).unwrap();
        let rep = minimize_energy(&topo, &r, &DemandProfile::new(vec![0.0]).unwrap(), &EnergyConfig::default()).unwrap();
        assert_eq!(rep.p_tot_w, 0.0);
        assert!(rep.active_cells.is_empty());
        assert!(rep.feasible);
    }

    #[test]
    fn pico_alone_serves_point() {
        let topo = macro_pico();
        // Patterns [0,1], [1,0], [1,1]: pico alone 8 Mbit/s, macro alone 1 Mbit/s.
        let r = RateTable::from_nested(&[vec![vec![0.0, 1e6, 0.5e6], vec![8e6, 0.0, 2e6]]]).unwrap();
        let d = 2e6;
        let rep = minimize_energy(&topo, &r, &DemandProfile::new(vec![d]).unwrap(), &EnergyConfig::default()).unwrap();
        assert_eq!(rep.active_cells, vec![1]);
        let expected = 0.5 * (d / 8e6) * 38.0 + 0.5 * 38.0;
        assert!((rep.p_tot_w - expected).abs() < 1e-6, "{}", rep.p_tot_w);
    }

    #[test]
    fn over_capacity_is_infeasible() {
        let topo = macro_pico();
        let r = RateTable::from_nested(&[vec![vec![0.0, 1e6, 0.5e6], vec![8e6, 0.0, 2e6]]]).unwrap();
        let rep = minimize_energy(&topo, &r, &DemandProfile::new(vec![9e6]).unwrap(), &EnergyConfig::default()).unwrap();
        assert!(!rep.feasible);
        assert!(rep.allocation.alpha().is_empty());
    }

    #[test]
    fn association_extraction() {
        let a = Allocation::empty(2);
        assert_eq!(extract_association(&a, 2, 3, ACTIVITY_THRESHOLD), vec![vec![0; 3]; 2]);
        let mut alpha = std::collections::BTreeMap::new();
        alpha.insert((1, 2, 1), 0.4);
        let a = Allocation::from_parts(alpha, vec![0.5, 0.5]).unwrap();
        let s = extract_association(&a, 2, 3, ACTIVITY_THRESHOLD);
        assert_eq!(s, vec![vec![0, 0, 0], vec![0, 0, 1]]);
    }
}
