//! Brute-force references for verification.
//!
//! Nothing here is tuned for speed. Each routine solves its problem in the
//! most literal form available (full subset enumeration, monolithic LPs,
//! vertex enumeration) so that it can serve as ground truth for the
//! decomposition methods.

use rayon::prelude::*;

use crate::lpcore::{self, LinearProgram, LpSolution, LpStatus, Sense};
use crate::netmodel::{NetworkTopology, RateTable};
use crate::patterns::PatternSet;
use crate::{DemandProfile, Error, Result};

/// Largest cell count accepted by [`exhaustive_min_power`].
pub const EXHAUSTIVE_CELL_LIMIT: usize = 8;

/// Largest variable count accepted by [`direct_lp`].
pub const DIRECT_VARIABLE_LIMIT: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveOptimum {
    pub p_tot_w: f64,
    /// Cells charged with their fixed power at the optimum, ascending.
    pub active: Vec<usize>,
}

/// Minimum total power over all activation subsets.
///
/// For a subset `S`, the fixed power of every cell in `S` is charged, cells
/// outside `S` may not serve, and the remaining usage-proportional power is
/// minimized by an LP. Ties between subsets go to the lexicographically
/// smallest index list.
pub fn exhaustive_min_power(
    topo: &NetworkTopology,
    rates: &RateTable,
    demand: &DemandProfile,
    patterns: &PatternSet,
) -> Result<ExhaustiveOptimum> {
    let cells = topo.len();
    if cells > EXHAUSTIVE_CELL_LIMIT {
        return Err(Error::Capacity { what: "cell count for subset enumeration", limit: EXHAUSTIVE_CELL_LIMIT, got: cells });
    }
    if rates.cells() != cells || patterns.cells() != cells || rates.patterns() != patterns.len() {
        return Err(Error::Dimension("topology, rate table and pattern set disagree".into()));
    }
    if demand.len() != rates.points() {
        return Err(Error::Dimension("demand vector length differs from point count".into()));
    }
    if demand.total() == 0.0 {
        return Ok(ExhaustiveOptimum { p_tot_w: 0.0, active: Vec::new() });
    }

    let subsets: Vec<u64> = (1..(1u64 << cells)).collect();
    let results: Vec<Option<(f64, Vec<usize>)>> = subsets
        .par_iter()
        .map(|&s| {
            subset_power(topo, rates, demand, patterns, s)
                .map(|p| p.map(|v| (v, (0..cells).filter(|b| s & (1 << b) != 0).collect())))
        })
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, Vec<usize>)> = None;
    for (p, set) in results.into_iter().flatten() {
        let better = match &best {
            None => true,
            Some((bp, bs)) => {
                let tie = (p - bp).abs() <= 1e-12 * bp.abs().max(1.0);
                if tie {
                    set < *bs
                } else {
                    p < *bp
                }
            }
        };
        if better {
            best = Some((p, set));
        }
    }
    best.map(|(p_tot_w, active)| ExhaustiveOptimum { p_tot_w, active })
        .ok_or_else(|| Error::Precondition("demand is not servable by any activation subset".into()))
}

/// Power of the best allocation using only the cells in `subset`, or `None`
/// when the demands cannot be met that way.
fn subset_power(
    topo: &NetworkTopology,
    rates: &RateTable,
    demand: &DemandProfile,
    patterns: &PatternSet,
    subset: u64,
) -> Result<Option<f64>> {
    let cells = topo.len();
    let d = demand.demands();
    let r_max = rates.max_rate();
    if r_max == 0.0 {
        return Ok(None);
    }

    // A pattern switching on cells outside the subset is redundant when its
    // restriction to the subset is also a candidate with rates at least as
    // high on every link the subset can use.
    let usable: Vec<usize> = (0..patterns.len())
        .filter(|&i| {
            let m = patterns.row_mask(i);
            if m & subset == 0 {
                return false;
            }
            if m & !subset == 0 {
                return true;
            }
            match patterns.index_of_mask(m & subset) {
                None => true,
                Some(j) => !(0..cells).filter(|&b| subset & m & (1 << b) != 0).all(|b| {
                    (0..rates.points()).all(|k| rates.get(k, b, j) >= rates.get(k, b, i))
                }),
            }
        })
        .collect();

    // Columns: α for usable (i, b ∈ subset, k with d_k > 0 and r > 0), then π.
    let mut cols: Vec<(usize, usize, usize)> = Vec::new();
    for &i in &usable {
        for b in (0..cells).filter(|&b| subset & (1 << b) != 0) {
            for k in (0..rates.points()).filter(|&k| d[k] > 0.0) {
                if rates.get(k, b, i) > 0.0 {
                    cols.push((k, b, i));
                }
            }
        }
    }
    for k in (0..rates.points()).filter(|&k| d[k] > 0.0) {
        if !cols.iter().any(|&(kk, _, _)| kk == k) {
            return Ok(None);
        }
    }
    let n_alpha = cols.len();
    let n = n_alpha + usable.len();
    let pi_col = |slot: usize| n_alpha + slot;

    let mut cost = vec![0.0; n];
    for (c, &(_, b, _)) in cols.iter().enumerate() {
        let cell = &topo.cells()[b];
        cost[c] = (1.0 - cell.fixed_fraction) * cell.op_power_max_w;
    }
    let mut lp = LinearProgram::new(Sense::Minimize, cost);
    for (slot, &i) in usable.iter().enumerate() {
        for b in (0..cells).filter(|&b| subset & (1 << b) != 0) {
            let mut row = vec![0.0; n];
            let mut any = false;
            for (c, &(_, cb, ci)) in cols.iter().enumerate() {
                if cb == b && ci == i {
                    row[c] = 1.0;
                    any = true;
                }
            }
            if any {
                row[pi_col(slot)] = -1.0;
                lp.add_ub(row, 0.0);
            }
        }
    }
    let mut share = vec![0.0; n];
    for slot in 0..usable.len() {
        share[pi_col(slot)] = 1.0;
    }
    lp.add_ub(share, 1.0);
    for k in (0..rates.points()).filter(|&k| d[k] > 0.0) {
        let mut row = vec![0.0; n];
        for (c, &(ck, b, i)) in cols.iter().enumerate() {
            if ck == k {
                row[c] = -rates.get(k, b, i) / r_max;
            }
        }
        lp.add_ub(row, -d[k] / r_max);
    }
    let sol = lpcore::solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let fixed: f64 = (0..cells)
                .filter(|&b| subset & (1 << b) != 0)
                .map(|b| topo.cells()[b].fixed_fraction * topo.cells()[b].op_power_max_w)
                .sum();
            Ok(Some(sol.value + fixed))
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Solver { stage: "subset oracle", status: sol.status.to_string() }),
    }
}

/// Monolithic LP forms of the balancing and energy subproblems.
#[derive(Debug, Clone, Copy)]
pub enum DirectProblem<'a> {
    /// Maximize `R` with `Σ α r ≥ β_k R` over feasible allocations.
    Balance { beta: &'a [f64] },
    /// Minimize `Σ α_kbi·(−r_kbi·λ_k/β_k)` over feasible allocations.
    InnerBalance { lambda: &'a [f64], beta: &'a [f64] },
    /// Minimize `Σ_b w_b·ρ_b` with `Σ α r ≥ d_k` over feasible allocations.
    Weighted { weights: &'a [f64], demand: &'a [f64] },
    /// Minimize `Σ α_kbi·(w_b − r_kbi·μ_k) + Σ d_k·μ_k` over feasible
    /// allocations.
    InnerEnergy { mu: &'a [f64], weights: &'a [f64], demand: &'a [f64] },
}

/// Solve one of the subproblems as a single dense LP.
///
/// Variables are laid out as `α_kbi` at `(i·B + b)·K + k`, then `π_i`, then
/// (balancing only) `R`. For [`DirectProblem::Balance`] the LP is assembled
/// with rates normalized by their maximum; `value` and `R` are reported in
/// bit/s, the remaining fields refer to the normalized problem.
pub fn direct_lp(problem: DirectProblem<'_>, rates: &RateTable) -> Result<LpSolution> {
    let (kk, bb, ii) = (rates.points(), rates.cells(), rates.patterns());
    let n_alpha = kk * bb * ii;
    let extra = usize::from(matches!(problem, DirectProblem::Balance { .. }));
    let n = n_alpha + ii + extra;
    if n > DIRECT_VARIABLE_LIMIT {
        return Err(Error::Capacity { what: "direct LP variable count", limit: DIRECT_VARIABLE_LIMIT, got: n });
    }
    let check = |v: &[f64], len: usize, what: &str| -> Result<()> {
        if v.len() == len {
            Ok(())
        } else {
            Err(Error::Dimension(format!("{what} has {} entries, expected {len}", v.len())))
        }
    };
    let col = |k: usize, b: usize, i: usize| (i * bb + b) * kk + k;
    let scale = match problem {
        DirectProblem::Balance { .. } => {
            let m = rates.max_rate();
            if m > 0.0 {
                m
            } else {
                1.0
            }
        }
        _ => 1.0,
    };
    let r = |k: usize, b: usize, i: usize| rates.get(k, b, i) / scale;

    let mut cost = vec![0.0; n];
    let mut constant = 0.0;
    let sense = match problem {
        DirectProblem::Balance { beta } => {
            check(beta, kk, "normalized demand")?;
            cost[n - 1] = 1.0;
            Sense::Maximize
        }
        DirectProblem::InnerBalance { lambda, beta } => {
            check(lambda, kk, "multiplier vector")?;
            check(beta, kk, "normalized demand")?;
            if beta.iter().any(|b| !(*b > 0.0)) {
                return Err(Error::Precondition("normalized demands must be positive".into()));
            }
            for i in 0..ii {
                for b in 0..bb {
                    for k in 0..kk {
                        cost[col(k, b, i)] = -r(k, b, i) * lambda[k] / beta[k];
                    }
                }
            }
            Sense::Minimize
        }
        DirectProblem::Weighted { weights, demand } => {
            check(weights, bb, "weight vector")?;
            check(demand, kk, "demand vector")?;
            for i in 0..ii {
                for b in 0..bb {
                    for k in 0..kk {
                        cost[col(k, b, i)] = weights[b];
                    }
                }
            }
            Sense::Minimize
        }
        DirectProblem::InnerEnergy { mu, weights, demand } => {
            check(mu, kk, "multiplier vector")?;
            check(weights, bb, "weight vector")?;
            check(demand, kk, "demand vector")?;
            for i in 0..ii {
                for b in 0..bb {
                    for k in 0..kk {
                        cost[col(k, b, i)] = weights[b] - r(k, b, i) * mu[k];
                    }
                }
            }
            constant = demand.iter().zip(mu).map(|(d, m)| d * m).sum();
            Sense::Minimize
        }
    };

    let mut lp = LinearProgram::new(sense, cost);
    if extra == 1 {
        lp.set_bounds(n - 1, f64::NEG_INFINITY, f64::INFINITY);
    }
    for i in 0..ii {
        for b in 0..bb {
            let mut row = vec![0.0; n];
            for k in 0..kk {
                row[col(k, b, i)] = 1.0;
            }
            row[n_alpha + i] = -1.0;
            lp.add_ub(row, 0.0);
        }
    }
    let mut share = vec![0.0; n];
    for i in 0..ii {
        share[n_alpha + i] = 1.0;
    }
    lp.add_eq(share, 1.0);
    match problem {
        DirectProblem::Balance { beta } => {
            for k in 0..kk {
                let mut row = vec![0.0; n];
                for i in 0..ii {
                    for b in 0..bb {
                        row[col(k, b, i)] = -r(k, b, i);
                    }
                }
                row[n - 1] = beta[k];
                lp.add_ub(row, 0.0);
            }
        }
        DirectProblem::Weighted { demand, .. } => {
            for k in 0..kk {
                let mut row = vec![0.0; n];
                for i in 0..ii {
                    for b in 0..bb {
                        row[col(k, b, i)] = -r(k, b, i);
                    }
                }
                lp.add_ub(row, -demand[k]);
            }
        }
        _ => {}
    }

    let mut sol = lpcore::solve(&lp)?;
    if sol.is_optimal() {
        sol.value += constant;
        if extra == 1 {
            sol.value *= scale;
            sol.x[n - 1] *= scale;
        }
    }
    Ok(sol)
}

/// Outcome of [`vertex_enumeration`].
#[derive(Debug, Clone, PartialEq)]
pub enum VertexOptimum {
    Optimal { value: f64, x: Vec<f64> },
    /// No feasible vertex exists.
    Infeasible,
}

/// Best objective over all basic feasible points of `lp`.
///
/// Every choice of `n` linearly independent active constraints (equalities
/// always active, plus inequality rows and finite bounds) is solved and
/// checked for feasibility. The feasible region is assumed to be pointed and
/// the objective bounded on it; unboundedness is not detected.
pub fn vertex_enumeration(lp: &LinearProgram) -> Result<VertexOptimum> {
    let n = lp.num_vars();
    // Inequalities a·x ≤ b from rows and bounds.
    let mut ineq: Vec<(Vec<f64>, f64)> = lp.a_ub.iter().cloned().zip(lp.b_ub.iter().copied()).collect();
    for j in 0..n {
        if lp.lower[j].is_finite() {
            let mut row = vec![0.0; n];
            row[j] = -1.0;
            ineq.push((row, -lp.lower[j]));
        }
        if lp.upper[j].is_finite() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            ineq.push((row, lp.upper[j]));
        }
    }
    let eq: Vec<(Vec<f64>, f64)> = lp.a_eq.iter().cloned().zip(lp.b_eq.iter().copied()).collect();
    let need = n.saturating_sub(eq.len());
    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut chosen = Vec::with_capacity(need);
    let mut visit = |subset: &[usize]| {
        let mut rows: Vec<Vec<f64>> = eq.iter().map(|(a, _)| a.clone()).collect();
        let mut rhs: Vec<f64> = eq.iter().map(|(_, b)| *b).collect();
        for &s in subset {
            rows.push(ineq[s].0.clone());
            rhs.push(ineq[s].1);
        }
        let Some(x) = solve_square(&rows[..n.min(rows.len())], &rhs[..n.min(rhs.len())]) else {
            return;
        };
        let feasible = ineq.iter().all(|(a, b)| dot(a, &x) <= b + 1e-9 * (1.0 + b.abs()))
            && eq.iter().all(|(a, b)| (dot(a, &x) - b).abs() <= 1e-9 * (1.0 + b.abs()));
        if !feasible {
            return;
        }
        let v = dot(&lp.cost, &x);
        if best.as_ref().is_none_or(|(bv, _)| sign * v < sign * bv) {
            best = Some((v, x));
        }
    };
    combinations(ineq.len(), need, 0, &mut chosen, &mut visit);
    Ok(match best {
        Some((value, x)) => VertexOptimum::Optimal { value, x },
        None => VertexOptimum::Infeasible,
    })
}

fn combinations(total: usize, need: usize, start: usize, chosen: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if chosen.len() == need {
        f(chosen);
        return;
    }
    for s in start..total {
        if total - s < need - chosen.len() {
            break;
        }
        chosen.push(s);
        combinations(total, need, s + 1, chosen, f);
        chosen.pop();
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_square(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.len() != n {
        return None;
    }
    let mut m: Vec<Vec<f64>> = rows.iter().zip(rhs).map(|(r, b)| {
        let mut row = r.clone();
        row.push(*b);
        row
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = m[r][c] / m[c][c];
                if f != 0.0 {
                    for j in c..=n {
                        m[r][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    Some((0..n).map(|r| m[r][n] / m[r][r]).collect())
}
