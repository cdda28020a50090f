//! Dense bounded-variable simplex.
//!
//! Every row `i` gets a logical variable `r_i = a_i x` whose bounds encode the
//! row sense, so the working system is `[A | -I] (x, r) = 0` with bounds on all
//! columns. The tableau stores `B^{-1} [A | -I]`. A cold start uses the
//! all-logical basis and a primal phase 1 that minimises the sum of bound
//! violations; a warm start after bound changes runs the dual simplex first.

use super::{MilpModel, Sense, SolveOptions};

const PIVOT_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;
const REFACTOR_INTERVAL: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NonBasic {
    Lower,
    Upper,
    /// Free variable resting at zero.
    Zero,
    Basic,
}

/// Constraint data shared by every LP solved for one model.
#[derive(Debug, Clone)]
pub(crate) struct LpData {
    pub m: usize,
    pub n: usize,
    rows: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    objective_constant: f64,
}

impl LpData {
    pub fn from_model(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let m = model.num_constraints();
        let mut lo: Vec<f64> = model.variables().iter().map(|v| v.lo).collect();
        let mut hi: Vec<f64> = model.variables().iter().map(|v| v.hi).collect();
        let mut rows = Vec::with_capacity(m);
        for c in model.constraints() {
            rows.push(c.terms.iter().map(|&(v, a)| (v.0, a)).collect());
            let (l, h) = match c.sense {
                Sense::Le => (f64::NEG_INFINITY, c.rhs),
                Sense::Ge => (c.rhs, f64::INFINITY),
                Sense::Eq => (c.rhs, c.rhs),
            };
            lo.push(l);
            hi.push(h);
        }
        let mut cost = vec![0.0; n + m];
        for &(v, c) in model.objective_terms() {
            cost[v.0] = c;
        }
        LpData {
            m,
            n,
            rows,
            cost,
            lo,
            hi,
            objective_constant: model.objective_constant(),
        }
    }

    fn ncol(&self) -> usize {
        self.n + self.m
    }
}

/// Basis description used to rebuild a tableau.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    basic: Vec<usize>,
    status: Vec<NonBasic>,
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    m: usize,
    ncol: usize,
    t: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<NonBasic>,
    pub x: Vec<f64>,
    d: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    since_refactor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

fn nonbasic_position(lo: f64, hi: f64, preferred: NonBasic) -> (NonBasic, f64) {
    match preferred {
        NonBasic::Upper if hi.is_finite() => (NonBasic::Upper, hi),
        _ if lo.is_finite() => (NonBasic::Lower, lo),
        _ if hi.is_finite() => (NonBasic::Upper, hi),
        _ => (NonBasic::Zero, 0.0),
    }
}

impl Tableau {
    /// All-logical starting basis with bounds `lo`/`hi`.
    pub fn slack(lp: &LpData, lo: Vec<f64>, hi: Vec<f64>) -> Self {
        let (m, n, ncol) = (lp.m, lp.n, lp.ncol());
        let mut t = vec![0.0; m * ncol];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in row {
                t[i * ncol + j] = -a;
            }
            t[i * ncol + n + i] = 1.0;
        }
        let mut status = vec![NonBasic::Basic; ncol];
        let mut x = vec![0.0; ncol];
        for j in 0..n {
            let (s, v) = nonbasic_position(lo[j], hi[j], NonBasic::Lower);
            status[j] = s;
            x[j] = v;
        }
        let mut tab = Tableau {
            m,
            ncol,
            t,
            basis: (n..ncol).collect(),
            status,
            x,
            d: vec![0.0; ncol],
            lo,
            hi,
            since_refactor: 0,
        };
        tab.recompute_basics();
        tab.recompute_reduced_costs(lp);
        tab
    }

    /// Rebuild the tableau for `basis` by pivoting from the logical basis.
    pub fn from_basis(lp: &LpData, lo: Vec<f64>, hi: Vec<f64>, basis: &Basis) -> Self {
        let mut tab = Tableau::slack(lp, lo, hi);
        let n = lp.n;
        let mut wanted = vec![false; tab.ncol];
        for &b in &basis.basic {
            wanted[b] = true;
        }
        for &q in basis.basic.iter().filter(|&&b| b < n) {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..tab.m {
                let b = tab.basis[r];
                if b < n || wanted[b] {
                    continue;
                }
                let a = tab.t[r * tab.ncol + q].abs();
                if a > PIVOT_TOL && best.map_or(true, |(_, ba)| a > ba) {
                    best = Some((r, a));
                }
            }
            if let Some((r, _)) = best {
                tab.pivot(r, q);
            }
        }
        for j in 0..tab.ncol {
            if tab.status[j] != NonBasic::Basic {
                let (s, v) = nonbasic_position(tab.lo[j], tab.hi[j], basis.status[j]);
                tab.status[j] = s;
                tab.x[j] = v;
            }
        }
        tab.since_refactor = 0;
        tab.recompute_basics();
        tab.recompute_reduced_costs(lp);
        tab
    }

    pub fn basis(&self) -> Basis {
        Basis {
            basic: self.basis.clone(),
            status: self.status.clone(),
        }
    }

    /// Replace bounds of column `j`, moving it if it is nonbasic.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.status[j] != NonBasic::Basic {
            let (s, v) = nonbasic_position(lo, hi, self.status[j]);
            self.status[j] = s;
            let delta = v - self.x[j];
            if delta != 0.0 {
                self.x[j] = v;
                for i in 0..self.m {
                    let a = self.t[i * self.ncol + j];
                    if a != 0.0 {
                        self.x[self.basis[i]] -= a * delta;
                    }
                }
            }
        }
    }

    fn recompute_basics(&mut self) {
        for i in 0..self.m {
            let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
            let mut v = 0.0;
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 && self.status[j] != NonBasic::Basic {
                    v -= a * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    fn recompute_reduced_costs(&mut self, lp: &LpData) {
        self.d.copy_from_slice(&lp.cost);
        for i in 0..self.m {
            let cb = lp.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
            for (dj, &a) in self.d.iter_mut().zip(row) {
                *dj -= cb * a;
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    fn refactor(&mut self, lp: &LpData) {
        let basis = self.basis();
        let rebuilt = Tableau::from_basis(lp, self.lo.clone(), self.hi.clone(), &basis);
        *self = rebuilt;
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncol = self.ncol;
        let piv = self.t[r * ncol + q];
        {
            let row = &mut self.t[r * ncol..(r + 1) * ncol];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[q] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * ncol);
        let (prow, after) = rest.split_at_mut(ncol);
        let eliminate = |row: &mut [f64]| {
            let f = row[q];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        };
        before.chunks_exact_mut(ncol).for_each(eliminate);
        after.chunks_exact_mut(ncol).for_each(eliminate);
        let dq = self.d[q];
        if dq != 0.0 {
            for (v, &p) in self.d.iter_mut().zip(prow.iter()) {
                *v -= dq * p;
            }
            self.d[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.status[q] = NonBasic::Basic;
        // Caller fixes the leaving variable's position.
        self.status[leaving] = NonBasic::Lower;
        self.since_refactor += 1;
    }

    fn infeasibility(&self, j: usize, tol: f64) -> f64 {
        let x = self.x[j];
        if x < self.lo[j] - tol {
            self.lo[j] - x
        } else if x > self.hi[j] + tol {
            x - self.hi[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self, tol: f64) -> bool {
        self.basis.iter().any(|&b| self.infeasibility(b, tol) > 0.0)
    }

    fn dual_feasible(&self) -> bool {
        (0..self.ncol).all(|j| {
            if self.hi[j] - self.lo[j] <= 0.0 {
                return true;
            }
            match self.status[j] {
                NonBasic::Basic => true,
                NonBasic::Lower => self.d[j] >= -DUAL_TOL,
                NonBasic::Upper => self.d[j] <= DUAL_TOL,
                NonBasic::Zero => self.d[j].abs() <= DUAL_TOL,
            }
        })
    }

    /// Direction in which a nonbasic column may improve for reduced cost `dj`.
    fn improving_direction(&self, j: usize, dj: f64) -> Option<f64> {
        if self.hi[j] - self.lo[j] <= 0.0 {
            return None;
        }
        match self.status[j] {
            NonBasic::Basic => None,
            NonBasic::Lower if dj < -DUAL_TOL => Some(1.0),
            NonBasic::Upper if dj > DUAL_TOL => Some(-1.0),
            NonBasic::Zero if dj.abs() > DUAL_TOL => Some(-dj.signum()),
            _ => None,
        }
    }

    fn primal(&mut self, lp: &LpData, ftol: f64, max_iter: usize) -> LpStatus {
        let mut degenerate = 0usize;
        let mut phase1_d = vec![0.0; self.ncol];
        for _ in 0..max_iter {
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor(lp);
            }
            let phase1 = self.primal_infeasible(ftol);
            if phase1 {
                phase1_d.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..self.m {
                    let b = self.basis[i];
                    let cb = if self.x[b] < self.lo[b] - ftol {
                        -1.0
                    } else if self.x[b] > self.hi[b] + ftol {
                        1.0
                    } else {
                        continue;
                    };
                    let row = &self.t[i * self.ncol..(i + 1) * self.ncol];
                    for (dj, &a) in phase1_d.iter_mut().zip(row) {
                        *dj -= cb * a;
                    }
                }
            }
            let d: &[f64] = if phase1 { &phase1_d } else { &self.d };
            let bland = degenerate >= DEGENERATE_LIMIT;

            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.ncol {
                if let Some(dir) = self.improving_direction(j, d[j]) {
                    if bland {
                        entering = Some((j, dir));
                        break;
                    }
                    if d[j].abs() > best {
                        best = d[j].abs();
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = entering else {
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };

            // Harris two-pass ratio test.
            let ratio = |tab: &Tableau, i: usize, relax: f64| -> Option<(f64, NonBasic)> {
                let alpha = -tab.t[i * tab.ncol + q] * dir;
                if alpha.abs() < PIVOT_TOL {
                    return None;
                }
                let b = tab.basis[i];
                let (x, lo, hi) = (tab.x[b], tab.lo[b], tab.hi[b]);
                if alpha > 0.0 {
                    if x < lo - ftol {
                        Some(((lo - x + relax) / alpha, NonBasic::Lower))
                    } else if hi.is_finite() && x <= hi + ftol {
                        Some(((hi - x + relax) / alpha, NonBasic::Upper))
                    } else {
                        None
                    }
                } else if x > hi + ftol {
                    Some(((hi - x - relax) / alpha, NonBasic::Upper))
                } else if lo.is_finite() && x >= lo - ftol {
                    Some(((lo - x - relax) / alpha, NonBasic::Lower))
                } else {
                    None
                }
            };
            let mut theta_max = f64::INFINITY;
            for i in 0..self.m {
                if let Some((th, _)) = ratio(self, i, ftol) {
                    theta_max = theta_max.min(th.max(0.0));
                }
            }
            let mut leave: Option<(usize, f64, NonBasic)> = None;
            let mut leave_alpha = 0.0;
            for i in 0..self.m {
                if let Some((th, side)) = ratio(self, i, 0.0) {
                    let th = th.max(0.0);
                    if th > theta_max {
                        continue;
                    }
                    let a = self.t[i * self.ncol + q].abs();
                    let better = match leave {
                        None => true,
                        Some((r, _, _)) if bland => self.basis[i] < self.basis[r],
                        Some(_) => a > leave_alpha,
                    };
                    if better {
                        leave = Some((i, th, side));
                        leave_alpha = a;
                    }
                }
            }
            let flip = self.hi[q] - self.lo[q];
            let theta = match leave {
                Some((_, th, _)) if th < flip => th,
                _ if flip.is_finite() => flip,
                _ => return LpStatus::Unbounded,
            };
            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };

            let step = dir * theta;
            self.x[q] += step;
            for i in 0..self.m {
                let a = self.t[i * self.ncol + q];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * step;
                }
            }
            match leave {
                Some((r, th, side)) if th < flip => {
                    let b = self.basis[r];
                    self.pivot(r, q);
                    self.status[b] = side;
                    self.x[b] = if side == NonBasic::Upper { self.hi[b] } else { self.lo[b] };
                }
                _ => {
                    self.status[q] = if dir > 0.0 { NonBasic::Upper } else { NonBasic::Lower };
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                }
            }
        }
        LpStatus::IterationLimit
    }

    fn dual(&mut self, lp: &LpData, ftol: f64, max_iter: usize) -> Option<LpStatus> {
        let mut degenerate = 0usize;
        for _ in 0..max_iter {
            if self.since_refactor >= REFACTOR_INTERVAL {
                self.refactor(lp);
                if !self.dual_feasible() {
                    return None;
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let v = self.infeasibility(self.basis[i], ftol);
                if v > worst {
                    worst = v;
                    leave = Some((i, v));
                }
            }
            let Some((r, _)) = leave else {
                return Some(LpStatus::Optimal);
            };
            let b = self.basis[r];
            let (target, side) = if self.x[b] < self.lo[b] {
                (self.lo[b], NonBasic::Lower)
            } else {
                (self.hi[b], NonBasic::Upper)
            };
            let delta = target - self.x[b];
            let bland = degenerate >= DEGENERATE_LIMIT;

            let row = &self.t[r * self.ncol..(r + 1) * self.ncol];
            let mut entering: Option<(usize, f64)> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0;
            for j in 0..self.ncol {
                let alpha = row[j];
                if alpha.abs() < PIVOT_TOL || self.hi[j] - self.lo[j] <= 0.0 {
                    continue;
                }
                // x_b moves by -alpha * dx_j.
                let eligible = match self.status[j] {
                    NonBasic::Basic => false,
                    NonBasic::Lower => -alpha * delta > 0.0,
                    NonBasic::Upper => alpha * delta > 0.0,
                    NonBasic::Zero => true,
                };
                if !eligible {
                    continue;
                }
                let ratio = self.d[j].abs() / alpha.abs();
                let better = if bland {
                    ratio < best_ratio - DUAL_TOL
                } else {
                    ratio < best_ratio - DUAL_TOL
                        || (ratio <= best_ratio + DUAL_TOL && alpha.abs() > best_alpha)
                };
                if better {
                    best_ratio = ratio;
                    best_alpha = alpha.abs();
                    entering = Some((j, alpha));
                }
            }
            let Some((q, alpha)) = entering else {
                return Some(LpStatus::Infeasible);
            };
            degenerate = if best_ratio <= 1e-12 { degenerate + 1 } else { 0 };

            let dx = -delta / alpha;
            self.x[q] += dx;
            for i in 0..self.m {
                let a = self.t[i * self.ncol + q];
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * dx;
                }
            }
            self.pivot(r, q);
            self.status[b] = side;
            self.x[b] = target;
        }
        Some(LpStatus::IterationLimit)
    }

    /// Optimise from the current basis.
    pub fn solve(&mut self, lp: &LpData, ftol: f64) -> LpStatus {
        // Harris passes may leave basics infeasible by up to the working
        // tolerance; keep it well inside the caller's.
        let ftol = (ftol * 1e-2).max(1e-12);
        let max_iter = 50 * (self.m + self.ncol) + 1000;
        if self.primal_infeasible(ftol) && self.dual_feasible() {
            match self.dual(lp, ftol, max_iter) {
                Some(LpStatus::Infeasible) => return LpStatus::Infeasible,
                Some(LpStatus::IterationLimit) | Some(LpStatus::Unbounded) | None => {}
                Some(LpStatus::Optimal) => {}
            }
        }
        let mut status = self.primal(lp, ftol, max_iter);
        if status == LpStatus::Optimal {
            // Clean up accumulated drift and confirm.
            self.refactor(lp);
            if self.primal_infeasible(ftol) || !self.dual_feasible() {
                status = self.primal(lp, ftol, max_iter);
            }
        }
        status
    }

    pub fn objective(&self, lp: &LpData) -> f64 {
        lp.objective_constant
            + (0..lp.n).map(|j| lp.cost[j] * self.x[j]).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Solves the LP relaxation of `model` (integrality ignored).
pub fn solve_lp(model: &MilpModel, options: &SolveOptions) -> LpOutcome {
    let lp = LpData::from_model(model);
    let mut tab = Tableau::slack(&lp, lp.lo.clone(), lp.hi.clone());
    match tab.solve(&lp, options.feasibility_tol) {
        LpStatus::Optimal => LpOutcome::Optimal {
            objective: tab.objective(&lp),
            values: tab.x[..lp.n].to_vec(),
        },
        LpStatus::Infeasible => LpOutcome::Infeasible,
        LpStatus::Unbounded => LpOutcome::Unbounded,
        LpStatus::IterationLimit => LpOutcome::IterationLimit,
    }
}
