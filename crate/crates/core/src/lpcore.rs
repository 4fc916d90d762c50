//! Dense two-phase primal simplex.
//!
//! Problems are small by construction (master problems carry one variable per
//! test point and one row per cut), so the solver keeps a full dense tableau.
//! Pivoting uses Dantzig's rule and switches to Bland's rule after a streak of
//! degenerate pivots, which rules out cycling.
//!
//! Dual multipliers are reported as sensitivities of the optimal value with
//! respect to the right-hand sides, in the problem's own sense: for a
//! maximization, the multiplier of a binding `≤` row is non-negative; for a
//! minimization it is non-positive.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const PIVOT_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-8;
const OPT_TOL: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("row {row} of the {block} block has {got} entries, expected {expected}")]
    RowLength {
        block: &'static str,
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("{0} has inconsistent length")]
    Length(&'static str),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("variable {0} has lower bound above upper bound")]
    Bounds(usize),
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("basis matrix is singular")]
    Singular,
    #[error("starting basis is not primal feasible")]
    InfeasibleBasis,
}

/// `sense c·x` subject to `A_ub x ≤ b_ub`, `A_eq x = b_eq`, `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub cost: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// New program over `cost.len()` non-negative variables with no rows.
    pub fn new(sense: Sense, cost: Vec<f64>) -> Self {
        let n = cost.len();
        LinearProgram {
            sense,
            cost,
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn add_ub(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.cost.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Length("bounds"));
        }
        if self.a_ub.len() != self.b_ub.len() {
            return Err(LpError::Length("b_ub"));
        }
        if self.a_eq.len() != self.b_eq.len() {
            return Err(LpError::Length("b_eq"));
        }
        for (block, rows) in [("inequality", &self.a_ub), ("equality", &self.a_eq)] {
            for (r, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(LpError::RowLength {
                        block,
                        row: r,
                        got: row.len(),
                        expected: n,
                    });
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(LpError::NonFinite("constraint matrix"));
                }
            }
        }
        if self.cost.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("cost vector"));
        }
        if self.b_ub.iter().chain(&self.b_eq).any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(LpError::Bounds(j));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub x: Vec<f64>,
    /// Objective value in the problem's sense; NaN unless optimal.
    pub value: f64,
    pub duals_ub: Vec<f64>,
    pub duals_eq: Vec<f64>,
    /// `c - A_ubᵀ y_ub - A_eqᵀ y_eq`, in the problem's sense.
    pub reduced_costs: Vec<f64>,
    /// For infeasible problems: a vector `f` over the rows (inequality rows
    /// first) with `f_ub ≥ 0`, `[A_ub; A_eq]ᵀ f ≥ 0` and `bᵀ f < 0`, stated for
    /// the system after shifting every variable to a zero lower bound.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How an original variable is expressed through non-negative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = shift + col
    Shifted { col: usize, shift: f64 },
    /// x = shift - col
    Mirrored { col: usize, shift: f64 },
    /// x = pos - neg
    Free { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    cols: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    phase1: Vec<f64>,
    phase2: Vec<f64>,
    can_enter: Vec<bool>,
    iterations: usize,
    limit: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width;
        let piv = self.data[pr * w + pc];
        {
            let row = &mut self.data[pr * w..(pr + 1) * w];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[pc] = 1.0;
        }
        let prow: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        let nz: Vec<usize> = (0..w).filter(|&c| prow[c] != 0.0).collect();
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.data[r * w + pc];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[r * w..(r + 1) * w];
            for &c in &nz {
                row[c] -= f * prow[c];
            }
            row[pc] = 0.0;
        }
        for cost in [&mut self.phase1, &mut self.phase2] {
            let f = cost[pc];
            if f != 0.0 {
                for &c in &nz {
                    cost[c] -= f * prow[c];
                }
                cost[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// Primal simplex on the given cost row (`phase1` or `phase2`).
    fn optimize(&mut self, phase_one: bool) -> Result<Outcome, LpError> {
        let mut bland = false;
        let mut streak = 0usize;
        loop {
            let cost = if phase_one { &self.phase1 } else { &self.phase2 };
            let mut entering = None;
            let mut best = -OPT_TOL;
            for c in 0..self.cols {
                if !self.can_enter[c] {
                    continue;
                }
                let d = cost[c];
                if d < best {
                    entering = Some(c);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = entering else {
                return Ok(Outcome::Optimal);
            };

            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                match leave {
                    None => {
                        leave = Some(r);
                        best_ratio = ratio;
                    }
                    Some(cur) => {
                        let tie = (ratio - best_ratio).abs() <= 1e-12 * (1.0 + best_ratio);
                        if ratio < best_ratio && !tie {
                            leave = Some(r);
                            best_ratio = ratio;
                        } else if tie {
                            let better = if bland {
                                self.basis[r] < self.basis[cur]
                            } else {
                                a > self.at(cur, pc)
                            };
                            if better {
                                leave = Some(r);
                                best_ratio = best_ratio.min(ratio);
                            }
                        }
                    }
                }
            }
            let Some(pr) = leave else {
                return Ok(Outcome::Unbounded);
            };

            if best_ratio <= 1e-12 {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }

            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solve a linear program. Infeasibility and unboundedness are reported
/// through [`LpSolution::status`]; errors are reserved for malformed input and
/// exhausted iteration budgets.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let n = lp.num_vars();
    let minimize_sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    // Map variables onto non-negative columns.
    let mut maps = Vec::with_capacity(n);
    let mut col_cost = Vec::new();
    let mut box_rows: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        let c = minimize_sign * lp.cost[j];
        if lo.is_finite() {
            let col = col_cost.len();
            col_cost.push(c);
            if hi.is_finite() {
                box_rows.push((col, hi - lo));
            }
            maps.push(VarMap::Shifted { col, shift: lo });
        } else if hi.is_finite() {
            let col = col_cost.len();
            col_cost.push(-c);
            maps.push(VarMap::Mirrored { col, shift: hi });
        } else {
            let pos = col_cost.len();
            col_cost.push(c);
            col_cost.push(-c);
            maps.push(VarMap::Free { pos, neg: pos + 1 });
        }
    }
    let nstruct = col_cost.len();

    // Rows in standardized column space: (coefficients, rhs, is_inequality).
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    let push_row = |orig: &[f64], rhs: f64, ineq: bool, rows: &mut Vec<(Vec<f64>, f64, bool)>| {
        let mut coeffs = vec![0.0; nstruct];
        let mut b = rhs;
        for (j, &a) in orig.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shifted { col, shift } => {
                    coeffs[col] += a;
                    b -= a * shift;
                }
                VarMap::Mirrored { col, shift } => {
                    coeffs[col] -= a;
                    b -= a * shift;
                }
                VarMap::Free { pos, neg } => {
                    coeffs[pos] += a;
                    coeffs[neg] -= a;
                }
            }
        }
        rows.push((coeffs, b, ineq));
    };
    for (row, &b) in lp.a_ub.iter().zip(&lp.b_ub) {
        push_row(row, b, true, &mut rows);
    }
    for (row, &b) in lp.a_eq.iter().zip(&lp.b_eq) {
        push_row(row, b, false, &mut rows);
    }
    for &(col, width) in &box_rows {
        let mut coeffs = vec![0.0; nstruct];
        coeffs[col] = 1.0;
        rows.push((coeffs, width, true));
    }
    let n_ub = lp.a_ub.len();
    let n_eq = lp.a_eq.len();
    let m = rows.len();

    // Scaling: rows by their largest coefficient, costs by the largest cost.
    let row_scale: Vec<f64> = rows
        .iter()
        .map(|(c, _, _)| {
            let mx = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if mx > 0.0 {
                1.0 / mx
            } else {
                1.0
            }
        })
        .collect();
    let cost_scale = {
        let mx = col_cost.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if mx > 0.0 {
            mx
        } else {
            1.0
        }
    };

    // Column layout: structural | one slack per inequality row | artificials.
    let slack_of: Vec<Option<usize>> = {
        let mut next = nstruct;
        rows.iter()
            .map(|(_, _, ineq)| {
                if *ineq {
                    next += 1;
                    Some(next - 1)
                } else {
                    None
                }
            })
            .collect()
    };
    let n_slack = slack_of.iter().filter(|s| s.is_some()).count();
    let flip: Vec<f64> = rows
        .iter()
        .zip(&row_scale)
        .map(|((_, b, _), s)| if b * s < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let needs_art: Vec<bool> = (0..m).map(|r| slack_of[r].is_none() || flip[r] < 0.0).collect();
    let mut art_of = vec![None; m];
    let mut next = nstruct + n_slack;
    for r in 0..m {
        if needs_art[r] {
            art_of[r] = Some(next);
            next += 1;
        }
    }
    let cols = next;
    let width = cols + 1;

    let mut data = vec![0.0; m * width];
    let mut basis = vec![0usize; m];
    for r in 0..m {
        let (coeffs, b, _) = &rows[r];
        let f = flip[r] * row_scale[r];
        let base = r * width;
        for (c, &a) in coeffs.iter().enumerate() {
            if a != 0.0 {
                data[base + c] = f * a;
            }
        }
        if let Some(s) = slack_of[r] {
            data[base + s] = flip[r] * row_scale[r];
        }
        if let Some(a) = art_of[r] {
            data[base + a] = 1.0;
            basis[r] = a;
        } else {
            basis[r] = slack_of[r].expect("row without artificial has a slack");
        }
        data[base + cols] = f * b;
    }

    let mut phase2 = vec![0.0; width];
    for (c, &v) in col_cost.iter().enumerate() {
        phase2[c] = v / cost_scale;
    }
    let mut phase1 = vec![0.0; width];
    for r in 0..m {
        if let Some(a) = art_of[r] {
            phase1[a] = 1.0;
        }
    }
    // Price out the initial basis (artificial costs in phase 1; all basic
    // columns have zero phase-2 cost).
    for r in 0..m {
        if art_of[r].is_some() {
            let base = r * width;
            for c in 0..width {
                phase1[c] -= data[base + c];
            }
        }
    }

    let mut can_enter = vec![true; cols];
    for a in art_of.iter().flatten() {
        can_enter[*a] = false;
    }

    let mut t = Tableau {
        rows: m,
        cols,
        width,
        data,
        basis,
        phase1,
        phase2,
        can_enter,
        iterations: 0,
        limit: 1000 + 50 * (m + cols),
    };

    let rhs_norm = (0..m).fold(0.0f64, |a, r| a.max(t.rhs(r).abs()));
    let has_art = art_of.iter().any(|a| a.is_some());
    if has_art {
        t.optimize(true)?;
        let infeas = -t.phase1[cols];
        if infeas > FEAS_TOL * (1.0 + rhs_norm) {
            // Phase-1 duals yield the certificate.
            let mut ray = vec![0.0; n_ub + n_eq];
            for r in 0..(n_ub + n_eq) {
                let y_orig = if let Some(s) = slack_of[r] {
                    -t.phase1[s]
                } else {
                    let a = art_of[r].expect("equality rows carry artificials");
                    flip[r] * row_scale[r] * (1.0 - t.phase1[a])
                };
                ray[r] = -y_orig;
            }
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                value: f64::NAN,
                duals_ub: Vec::new(),
                duals_eq: Vec::new(),
                reduced_costs: Vec::new(),
                farkas: Some(ray),
                iterations: t.iterations,
            });
        }
        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if art_of.iter().flatten().any(|&a| a == t.basis[r]) {
                let mut best: Option<(usize, f64)> = None;
                for c in 0..(nstruct + n_slack) {
                    let v = t.at(r, c).abs();
                    if v > 1e-9 && best.is_none_or(|(_, bv)| v > bv) {
                        best = Some((c, v));
                    }
                }
                if let Some((c, _)) = best {
                    t.pivot(r, c);
                }
            }
        }
    }

    if let Outcome::Unbounded = t.optimize(false)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: Vec::new(),
            value: match lp.sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
            duals_ub: Vec::new(),
            duals_eq: Vec::new(),
            reduced_costs: Vec::new(),
            farkas: None,
            iterations: t.iterations,
        });
    }

    let mut colval = vec![0.0; cols];
    for r in 0..m {
        colval[t.basis[r]] = t.rhs(r).max(0.0);
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|mp| match *mp {
            VarMap::Shifted { col, shift } => shift + colval[col],
            VarMap::Mirrored { col, shift } => shift - colval[col],
            VarMap::Free { pos, neg } => colval[pos] - colval[neg],
        })
        .collect();
    let value: f64 = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();

    let sense_sign = minimize_sign;
    let mut duals_ub = vec![0.0; n_ub];
    let mut duals_eq = vec![0.0; n_eq];
    for r in 0..(n_ub + n_eq) {
        let y_min = if let Some(s) = slack_of[r] {
            -t.phase2[s]
        } else {
            let a = art_of[r].expect("equality rows carry artificials");
            -flip[r] * row_scale[r] * t.phase2[a]
        } * cost_scale;
        let y = sense_sign * y_min;
        if r < n_ub {
            duals_ub[r] = y;
        } else {
            duals_eq[r - n_ub] = y;
        }
    }
    let mut reduced_costs = lp.cost.clone();
    for (row, y) in lp.a_ub.iter().zip(&duals_ub).chain(lp.a_eq.iter().zip(&duals_eq)) {
        if *y == 0.0 {
            continue;
        }
        for (d, a) in reduced_costs.iter_mut().zip(row) {
            *d -= y * a;
        }
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        value,
        duals_ub,
        duals_eq,
        reduced_costs,
        farkas: None,
        iterations: t.iterations,
    })
}

/// Revised primal simplex for `min c·x` subject to `A x = b`, `x ≥ 0`, kept
/// alive across solves.
///
/// The caller supplies a primal feasible starting basis. Columns may be
/// appended between solves; appending never breaks primal feasibility, so
/// each re-solve resumes from the previous optimal basis. This is the shape
/// of a cutting-plane master written over cut weights, where every new cut is
/// one new column. The basis inverse is kept dense (`m × m`) and rebuilt from
/// scratch periodically and before optimality is declared.
#[derive(Debug, Clone)]
pub struct ColumnSimplex {
    m: usize,
    b: Vec<f64>,
    cost: Vec<f64>,
    columns: Vec<Vec<f64>>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    x_basic: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
}

const REFACTOR_EVERY: usize = 64;
const VERIFY_AFTER: usize = 16;

impl ColumnSimplex {
    pub fn new(b: Vec<f64>) -> Result<Self, LpError> {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        let m = b.len();
        Ok(ColumnSimplex {
            m,
            b,
            cost: Vec::new(),
            columns: Vec::new(),
            basis: Vec::new(),
            is_basic: Vec::new(),
            binv: Vec::new(),
            x_basic: Vec::new(),
            since_refactor: 0,
            iterations: 0,
        })
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    /// Total pivots over the lifetime of the solver.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Append a column; returns its index.
    pub fn add_column(&mut self, cost: f64, column: Vec<f64>) -> Result<usize, LpError> {
        if column.len() != self.m {
            return Err(LpError::RowLength { block: "column", row: self.columns.len(), got: column.len(), expected: self.m });
        }
        if !cost.is_finite() || column.iter().any(|v| !v.is_finite()) {
            return Err(LpError::NonFinite("column"));
        }
        self.cost.push(cost);
        self.columns.push(column);
        self.is_basic.push(false);
        Ok(self.columns.len() - 1)
    }

    /// Install a starting basis, one column per row.
    pub fn set_basis(&mut self, basis: Vec<usize>) -> Result<(), LpError> {
        if basis.len() != self.m || basis.iter().any(|&j| j >= self.columns.len()) {
            return Err(LpError::Length("basis"));
        }
        self.is_basic.iter_mut().for_each(|v| *v = false);
        for &j in &basis {
            if self.is_basic[j] {
                return Err(LpError::Singular);
            }
            self.is_basic[j] = true;
        }
        self.basis = basis;
        self.refactor()?;
        let scale = 1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if self.x_basic.iter().any(|&v| v < -FEAS_TOL * scale) {
            return Err(LpError::InfeasibleBasis);
        }
        Ok(())
    }

    /// Rebuild the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting, then recompute the basic values.
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let w = 2 * m;
        let mut a = vec![0.0; m * w];
        for (c, &j) in self.basis.iter().enumerate() {
            for r in 0..m {
                a[r * w + c] = self.columns[j][r];
            }
        }
        for r in 0..m {
            a[r * w + m + r] = 1.0;
        }
        let col_norm: Vec<f64> = self
            .basis
            .iter()
            .map(|&j| self.columns[j].iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
            .collect();
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[i * w + c].abs().total_cmp(&a[j * w + c].abs()))
                .expect("non-empty range");
            if !(a[p * w + c].abs() > 1e-13 * col_norm[c]) {
                return Err(LpError::Singular);
            }
            if p != c {
                for k in 0..w {
                    a.swap(p * w + k, c * w + k);
                }
            }
            let piv = a[c * w + c];
            for k in 0..w {
                a[c * w + k] /= piv;
            }
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * w + c];
                if f == 0.0 {
                    continue;
                }
                for k in 0..w {
                    a[r * w + k] -= f * a[c * w + k];
                }
            }
        }
        self.binv = vec![0.0; m * m];
        for r in 0..m {
            self.binv[r * m..(r + 1) * m].copy_from_slice(&a[r * w + m..(r + 1) * w]);
        }
        self.x_basic = (0..m).map(|r| (0..m).map(|k| self.binv[r * m + k] * self.b[k]).sum()).collect();
        self.since_refactor = 0;
        Ok(())
    }

    /// Simplex multipliers `y = c_Bᵀ B⁻¹`; at optimality these solve the dual
    /// `max bᵀy` subject to `Aᵀy ≤ c`.
    pub fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (r, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c == 0.0 {
                continue;
            }
            for k in 0..m {
                y[k] += c * self.binv[r * m + k];
            }
        }
        y
    }

    /// Current primal point over all columns.
    pub fn x(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.columns.len()];
        for (r, &j) in self.basis.iter().enumerate() {
            x[j] = self.x_basic[r].max(0.0);
        }
        x
    }

    pub fn value(&self) -> f64 {
        self.basis.iter().zip(&self.x_basic).map(|(&j, v)| self.cost[j] * v.max(0.0)).sum()
    }

    fn entering(&self, y: &[f64], bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.columns.len() {
            if self.is_basic[j] {
                continue;
            }
            let d = self.cost[j] - self.columns[j].iter().zip(y).map(|(a, y)| a * y).sum::<f64>();
            let scale = 1.0 + self.cost[j].abs();
            if d < -1e-12 * scale {
                let score = d / scale;
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, s)| score < s) {
                    best = Some((j, score));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Run primal simplex from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus, LpError> {
        if self.basis.len() != self.m {
            return Err(LpError::Length("basis"));
        }
        let m = self.m;
        let limit = self.iterations + 1000 + 50 * (m + self.columns.len());
        let mut bland = false;
        let mut streak = 0usize;
        let mut verified = false;
        loop {
            let y = self.duals();
            let Some(q) = self.entering(&y, bland) else {
                if verified || self.since_refactor < VERIFY_AFTER {
                    return Ok(LpStatus::Optimal);
                }
                // Confirm with a fresh inverse once enough updates piled up.
                self.refactor()?;
                verified = true;
                continue;
            };
            verified = false;
            let col = &self.columns[q];
            let d: Vec<f64> = (0..m).map(|r| (0..m).map(|k| self.binv[r * m + k] * col[k]).sum()).collect();
            let d_tol = 1e-9 * d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            // Harris two-pass ratio test: bound the step with slightly relaxed
            // feasibility, then take the largest pivot among rows within it.
            // Bland's rule needs the exact minimum-ratio set.
            let relax = if bland { 1e-12 } else { FEAS_TOL * (1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()))) };
            let mut step_cap = f64::INFINITY;
            for r in 0..m {
                if d[r] > d_tol {
                    step_cap = step_cap.min((self.x_basic[r].max(0.0) + relax) / d[r]);
                }
            }
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..m {
                if d[r] <= d_tol {
                    continue;
                }
                let ratio = self.x_basic[r].max(0.0) / d[r];
                if ratio > step_cap {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some(cur) if bland => self.basis[r] < self.basis[cur],
                    Some(cur) => d[r] > d[cur],
                };
                if better {
                    leave = Some(r);
                    best_ratio = ratio;
                }
            }
            let Some(p) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            if best_ratio <= 1e-12 {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            self.iterations += 1;
            if self.iterations > limit {
                return Err(LpError::IterationLimit(limit));
            }

            // Pivot on (p, q).
            let piv = d[p];
            let theta = self.x_basic[p].max(0.0) / piv;
            for r in 0..m {
                if r != p {
                    self.x_basic[r] -= theta * d[r];
                }
            }
            self.x_basic[p] = theta;
            let prow: Vec<f64> = self.binv[p * m..(p + 1) * m].iter().map(|v| v / piv).collect();
            for r in 0..m {
                if r == p || d[r] == 0.0 {
                    continue;
                }
                let f = d[r];
                for k in 0..m {
                    self.binv[r * m + k] -= f * prow[k];
                }
            }
            self.binv[p * m..(p + 1) * m].copy_from_slice(&prow);
            self.is_basic[self.basis[p]] = false;
            self.is_basic[q] = true;
            self.basis[p] = q;
            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_lower_bound() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.set_bounds(0, 3.0, f64::INFINITY);
        let s = solve(&lp).unwrap();
        assert!(s.is_optimal());
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.value - 3.0).abs() < 1e-12);
        // The bound is carried by the reduced cost.
        assert!((s.reduced_costs[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_row_form_of_lower_bound() {
        // min x s.t. -x <= -3
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.add_ub(vec![-1.0], -3.0);
        let s = solve(&lp).unwrap();
        assert!((s.value - 3.0).abs() < 1e-12);
        // d(value)/d(rhs) = -1
        assert!((s.duals_ub[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_face() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 1.0]);
        lp.add_ub(vec![1.0, 1.0], 1.0);
        let s = solve(&lp).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!((s.duals_ub[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_has_certificate() {
        // x + y <= 1, x + y >= 2
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.add_ub(vec![1.0, 1.0], 1.0);
        lp.add_ub(vec![-1.0, -1.0], -2.0);
        let s = solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        let f = s.farkas.unwrap();
        assert!(f.iter().all(|v| *v >= -1e-12));
        for j in 0..2 {
            let col: f64 = lp.a_ub.iter().zip(&f).map(|(r, fi)| r[j] * fi).sum();
            assert!(col >= -1e-9);
        }
        let bf: f64 = lp.b_ub.iter().zip(&f).map(|(b, fi)| b * fi).sum();
        assert!(bf < 0.0);
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 0.0]);
        lp.add_ub(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_mirrored_variables() {
        // min x - y, x free, y <= 2, x >= -1 via row, x + y = 0.5
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, -1.0]);
        lp.set_bounds(0, f64::NEG_INFINITY, f64::INFINITY);
        lp.set_bounds(1, f64::NEG_INFINITY, 2.0);
        lp.add_ub(vec![-1.0, 0.0], 1.0);
        lp.add_eq(vec![1.0, 1.0], 0.5);
        let s = solve(&lp).unwrap();
        assert!(s.is_optimal());
        // y = 2 pushes x = -1.5 < -1, so x = -1, y = 1.5
        assert!((s.x[0] + 1.0).abs() < 1e-10);
        assert!((s.x[1] - 1.5).abs() < 1e-10);
        assert!((s.value + 2.5).abs() < 1e-10);
    }

    #[test]
    fn equality_redundancy_is_tolerated() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![1.0, 2.0]);
        lp.add_eq(vec![1.0, 1.0], 1.0);
        lp.add_eq(vec![2.0, 2.0], 2.0);
        let s = solve(&lp).unwrap();
        assert!(s.is_optimal());
        assert!((s.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn malformed_rows_rejected() {
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0, 1.0]);
        lp.add_ub(vec![1.0], 1.0);
        assert!(matches!(solve(&lp), Err(LpError::RowLength { .. })));
        let mut lp = LinearProgram::new(Sense::Minimize, vec![1.0]);
        lp.set_bounds(0, 2.0, 1.0);
        assert_eq!(solve(&lp).unwrap_err(), LpError::Bounds(0));
    }

    #[test]
    fn column_simplex_matches_row_solver_and_resumes() {
        // max R s.t. 3κ0 + κ1 ≥ R, κ0 + 2κ1 ≥ R, κ0 + κ1 = 1, written over
        // columns s0, s1, R, κ0, κ1 with surplus columns s.
        let mut cs = ColumnSimplex::new(vec![0.0, 0.0, 1.0]).unwrap();
        cs.add_column(0.0, vec![-1.0, 0.0, 0.0]).unwrap();
        cs.add_column(0.0, vec![0.0, -1.0, 0.0]).unwrap();
        cs.add_column(-1.0, vec![-1.0, -1.0, 0.0]).unwrap();
        cs.add_column(0.0, vec![3.0, 1.0, 1.0]).unwrap();
        cs.set_basis(vec![0, 1, 3]).unwrap();
        assert_eq!(cs.solve().unwrap(), LpStatus::Optimal);
        assert!((cs.value() + 1.0).abs() < 1e-12);
        let k = cs.add_column(0.0, vec![1.0, 2.0, 1.0]).unwrap();
        assert_eq!(cs.solve().unwrap(), LpStatus::Optimal);
        // 3a + (1 − a) = a + 2(1 − a) at a = 1/3 gives R = 5/3.
        assert!((cs.value() + 5.0 / 3.0).abs() < 1e-12);
        assert!((cs.x()[k] - 2.0 / 3.0).abs() < 1e-12);
        let y = cs.duals();
        // Dual: λ = (1/3, 2/3) on the two rows, z = −5/3 on the last.
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-12 && (y[1] - 2.0 / 3.0).abs() < 1e-12);
        assert!((y[2] + 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn column_simplex_rejects_bad_start() {
        let mut cs = ColumnSimplex::new(vec![1.0]).unwrap();
        cs.add_column(1.0, vec![-1.0]).unwrap();
        assert_eq!(cs.set_basis(vec![0]).unwrap_err(), LpError::InfeasibleBasis);
        let mut cs = ColumnSimplex::new(vec![1.0]).unwrap();
        cs.add_column(1.0, vec![0.0]).unwrap();
        assert_eq!(cs.set_basis(vec![0]).unwrap_err(), LpError::Singular);
    }

    #[test]
    fn deterministic() {
        let mut lp = LinearProgram::new(Sense::Maximize, vec![3.0, 2.0, 4.0]);
        lp.add_ub(vec![1.0, 1.0, 2.0], 4.0);
        lp.add_ub(vec![2.0, 0.0, 3.0], 5.0);
        lp.add_ub(vec![2.0, 1.0, 3.0], 7.0);
        let a = solve(&lp).unwrap();
        let b = solve(&lp).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.duals_ub, b.duals_ub);
    }
}
