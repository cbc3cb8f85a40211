//! Dense two-phase primal simplex.
//!
//! Pricing is Dantzig's rule; after a run of degenerate pivots the phase switches to
//! Bland's rule, which cannot cycle. Ratio-test ties go to the lowest basic index.

use thiserror::Error;

/// Phase-1 optimum above this value certifies infeasibility.
pub const INFEASIBILITY_TOL: f64 = 1e-8;
const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-10;
const DEGENERATE_RUN: usize = 30;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid linear program: {0}")]
    Invalid(String),
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program over bounded variables. Variables default to `[0, +inf)`.
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        LinearProgram { sense, objective: Vec::new(), lower: Vec::new(), upper: Vec::new(), constraints: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds a variable with bounds `[lo, hi]` and objective coefficient `cost`.
    pub fn add_var(&mut self, lo: f64, hi: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lo);
        self.upper.push(hi);
        self.objective.len() - 1
    }

    /// Adds `n` nonnegative variables with zero cost and returns the first index.
    pub fn add_vars(&mut self, n: usize) -> usize {
        let first = self.num_vars();
        for _ in 0..n {
            self.add_var(0.0, f64::INFINITY, 0.0);
        }
        first
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    /// Largest violation of constraints and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (k, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[k] - v).max(v - self.upper[k]);
        }
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().map(|&(k, a)| a * x[k]).sum();
            let viol = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; for infeasible programs, the phase-1 end point.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Phase-1 optimum (sum of artificial variables).
    pub infeasibility: f64,
    pub iterations: usize,
}

/// How an original variable maps onto nonnegative tableau columns.
enum VarMap {
    Shift { col: usize, offset: f64 },
    Flip { col: usize, offset: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    w: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    limit: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.w + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.w + self.w - 1]
    }

    fn pivot(&mut self, obj: &mut [f64], r: usize, e: usize) {
        let w = self.w;
        let p = self.data[r * w + e];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let prow: Vec<(usize, f64)> =
            self.data[r * w..(r + 1) * w].iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (k, *v)).collect();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * w + e];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for &(k, v) in &prow {
                    row[k] -= f * v;
                }
                row[e] = 0.0;
            }
        }
        let f = obj[e];
        if f != 0.0 {
            for &(k, v) in &prow {
                obj[k] -= f * v;
            }
            obj[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Builds the reduced-cost row for minimizing `cost` over the current basis.
    fn objective_row(&self, cost: &[f64]) -> Vec<f64> {
        let mut obj = vec![0.0; self.w];
        obj[..cost.len()].copy_from_slice(cost);
        for r in 0..self.m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                for k in 0..self.w {
                    obj[k] -= cb * self.data[r * self.w + k];
                }
            }
        }
        obj
    }

    /// Minimizes the objective encoded in `obj` over columns with `allowed[c]`.
    fn optimize(&mut self, obj: &mut [f64], allowed: &[bool]) -> Result<bool, LpError> {
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -COST_EPS;
            for (c, &ok) in allowed.iter().enumerate() {
                if ok && obj[c] < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = obj[c];
                }
            }
            let Some(e) = enter else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, e);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12 || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            degenerate = if ratio <= 1e-12 { degenerate + 1 } else { 0 };
            self.pivot(obj, r, e);
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(LpError::IterationLimit(self.limit));
            }
        }
    }
}

/// Solves the program with a two-phase simplex.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let nv = lp.num_vars();
    if lp.lower.len() != nv || lp.upper.len() != nv {
        return Err(LpError::Invalid("bounds do not match variables".into()));
    }
    let mut maps = Vec::with_capacity(nv);
    let mut ncols = 0usize;
    let mut bound_rows: Vec<(usize, f64)> = Vec::new();
    for k in 0..nv {
        let (lo, hi) = (lp.lower[k], lp.upper[k]);
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(LpError::Invalid(format!("variable {k} has bounds [{lo}, {hi}]")));
        }
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ncols, offset: lo });
            if hi.is_finite() {
                bound_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Flip { col: ncols, offset: hi });
            ncols += 1;
        } else {
            maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
            ncols += 2;
        }
    }
    let n_struct = ncols;

    // Rows in structural columns with nonnegative right-hand sides.
    let mut rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(c.coeffs.len());
        let mut rhs = c.rhs;
        for &(k, a) in &c.coeffs {
            if k >= nv {
                return Err(LpError::Invalid(format!("constraint references variable {k}")));
            }
            if a == 0.0 {
                continue;
            }
            match maps[k] {
                VarMap::Shift { col, offset } => {
                    coeffs.push((col, a));
                    rhs -= a * offset;
                }
                VarMap::Flip { col, offset } => {
                    coeffs.push((col, -a));
                    rhs -= a * offset;
                }
                VarMap::Split { pos, neg } => {
                    coeffs.push((pos, a));
                    coeffs.push((neg, -a));
                }
            }
        }
        rows.push((coeffs, c.relation, rhs));
    }
    for &(col, ub) in &bound_rows {
        rows.push((vec![(col, 1.0)], Relation::Le, ub));
    }
    for row in &mut rows {
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|e| e.1 = -e.1);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let total = n_struct + n_slack + n_art;
    let w = total + 1;
    let mut tab = Tableau {
        m,
        w,
        data: vec![0.0; m * w],
        basis: vec![0; m],
        iterations: 0,
        limit: 50_000 + 20 * (m + total),
    };
    let mut slack = n_struct;
    let mut art = n_struct + n_slack;
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        for &(c, a) in coeffs {
            tab.data[r * w + c] += a;
        }
        tab.data[r * w + total] = *rhs;
        match rel {
            Relation::Le => {
                tab.data[r * w + slack] = 1.0;
                tab.basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                tab.data[r * w + slack] = -1.0;
                slack += 1;
                tab.data[r * w + art] = 1.0;
                tab.basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                tab.data[r * w + art] = 1.0;
                tab.basis[r] = art;
                art += 1;
            }
        }
    }
    let is_art = |c: usize| c >= n_struct + n_slack && c < total;

    // Phase 1.
    let mut infeasibility = 0.0;
    if n_art > 0 {
        let cost: Vec<f64> = (0..total).map(|c| if is_art(c) { 1.0 } else { 0.0 }).collect();
        let mut obj = tab.objective_row(&cost);
        let allowed = vec![true; total];
        tab.optimize(&mut obj, &allowed)?;
        infeasibility = (0..m).filter(|&r| is_art(tab.basis[r])).map(|r| tab.rhs(r).max(0.0)).sum();
        if infeasibility > INFEASIBILITY_TOL {
            let x = recover(&tab, &maps, n_struct);
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective: lp.objective_value(&x),
                x,
                infeasibility,
                iterations: tab.iterations,
            });
        }
        // Drive zero-valued artificials out of the basis where possible.
        for r in 0..m {
            if is_art(tab.basis[r]) {
                if let Some(c) = (0..n_struct + n_slack).find(|&c| tab.at(r, c).abs() > PIVOT_EPS) {
                    tab.pivot(&mut obj, r, c);
                }
            }
        }
    }

    // Phase 2.
    let sign = if lp.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut cost = vec![0.0; total];
    for (k, map) in maps.iter().enumerate() {
        let ck = sign * lp.objective[k];
        match *map {
            VarMap::Shift { col, .. } => cost[col] = ck,
            VarMap::Flip { col, .. } => cost[col] = -ck,
            VarMap::Split { pos, neg } => {
                cost[pos] = ck;
                cost[neg] = -ck;
            }
        }
    }
    let mut obj = tab.objective_row(&cost);
    let allowed: Vec<bool> = (0..total).map(|c| !is_art(c)).collect();
    let bounded = tab.optimize(&mut obj, &allowed)?;
    let x = recover(&tab, &maps, n_struct);
    Ok(LpSolution {
        status: if bounded { LpStatus::Optimal } else { LpStatus::Unbounded },
        objective: lp.objective_value(&x),
        x,
        infeasibility,
        iterations: tab.iterations,
    })
}

fn recover(tab: &Tableau, maps: &[VarMap], n_struct: usize) -> Vec<f64> {
    let mut y = vec![0.0; n_struct];
    for r in 0..tab.m {
        if tab.basis[r] < n_struct {
            y[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    maps.iter()
        .map(|map| match *map {
            VarMap::Shift { col, offset } => offset + y[col],
            VarMap::Flip { col, offset } => offset - y[col],
            VarMap::Split { pos, neg } => y[pos] - y[neg],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36.
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(0.0, f64::INFINITY, 3.0);
        let y = lp.add_var(0.0, f64::INFINITY, 5.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_constraint(vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_constraint(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_free_variables() {
        // min |shape| via free v: min v s.t. v >= x - 1, v >= 1 - x, x + z = 3, z in [0, 1].
        let mut lp = LinearProgram::new(Sense::Minimize);
        let v = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
        let x = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 0.0);
        let z = lp.add_var(0.0, 1.0, 0.0);
        lp.add_constraint(vec![(v, 1.0), (x, -1.0)], Relation::Ge, -1.0);
        lp.add_constraint(vec![(v, 1.0), (x, 1.0)], Relation::Ge, 1.0);
        lp.add_constraint(vec![(x, 1.0), (z, 1.0)], Relation::Eq, 3.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-9, "{s:?}");
        assert!(lp.max_violation(&s.x) < 1e-9);
    }

    #[test]
    fn infeasible_is_certified() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var(0.0, 1.0, 0.0);
        lp.add_constraint(vec![(x, 1.0)], Relation::Ge, 2.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.infeasibility > INFEASIBILITY_TOL);
    }

    #[test]
    fn unbounded_is_detected() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(0.0, f64::INFINITY, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 0.0);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Relation::Le, 1.0);
        assert_eq!(lp_solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var(0.0, f64::INFINITY, 1.0);
        let y = lp.add_var(0.0, f64::INFINITY, 2.0);
        lp.add_constraint(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0);
        lp.add_constraint(vec![(x, 2.0), (y, 2.0)], Relation::Eq, 2.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }
}
