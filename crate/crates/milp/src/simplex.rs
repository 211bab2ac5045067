//! Dense bounded-variable simplex.
//!
//! Every constraint row `i` gets a row variable `r_i = a_i · x` whose bounds
//! encode the relation, so the working system is `[A | -I] z = 0` with
//! `lower <= z <= upper`. The tableau `B⁻¹ [A | -I]` is kept explicitly
//! together with the reduced-cost row. Nonbasic variables always sit exactly on
//! one of their bounds (or at zero when free).
//!
//! The engine keeps its basis between calls to [`LpEngine::solve`]. Changing
//! variable bounds never invalidates a basis, and a previously optimal basis
//! stays dual feasible after bound changes, so re-solving after a branching
//! decision is usually a handful of dual simplex pivots.
//!
//! Rows and columns are scaled by powers of two before solving; bounds and
//! values cross the API in original units. The dual simplex picks its leaving
//! row by steepest edge, read off the `B⁻¹` block of the tableau.

use crate::error::{MilpError, MilpResult};
use crate::model::{MilpModel, Relation, Sense};

pub(crate) const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-7;
const SINGULAR_TOL: f64 = 1e-12;
const ZERO_SNAP: f64 = 1e-13;
const REFACTOR_EVERY: usize = 100;
const NONBASIC: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub(crate) struct BasisSnapshot {
    basis: Vec<usize>,
    at_upper: Vec<bool>,
}

pub(crate) struct LpEngine {
    m: usize,
    n: usize,
    cols: usize,
    a: Vec<f64>,
    tab: Vec<f64>,
    d: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    since_refactor: usize,
    singular_events: usize,
    empty_row_violated: bool,
    scratch: Vec<f64>,
    nz: Vec<usize>,
    /// Original value of column `j` is `scale[j]` times its internal value.
    scale: Vec<f64>,
}

impl LpEngine {
    /// Builds an engine for the continuous relaxation of `model`, always
    /// minimizing (a maximization objective is negated).
    pub(crate) fn new(model: &MilpModel) -> Self {
        let n = model.num_vars();
        let sign = match model.sense() {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };

        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
        let mut empty_row_violated = false;
        for c in model.constraints() {
            let mut dense = vec![0.0; n];
            for &(v, coef) in &c.terms {
                dense[v.index()] += coef;
            }
            if dense.iter().all(|&v| v == 0.0) {
                let ok = match c.relation {
                    Relation::Le => 0.0 <= c.rhs + PRIMAL_TOL,
                    Relation::Ge => 0.0 >= c.rhs - PRIMAL_TOL,
                    Relation::Eq => c.rhs.abs() <= PRIMAL_TOL,
                };
                empty_row_violated |= !ok;
                continue;
            }
            rows.push((dense, c.relation, c.rhs));
        }

        let m = rows.len();
        let cols = n + m;
        let mut a = vec![0.0; m * n];
        let mut lower = vec![0.0; cols];
        let mut upper = vec![0.0; cols];
        for (j, v) in model.variables().iter().enumerate() {
            lower[j] = v.lower;
            upper[j] = v.upper;
        }
        for (i, (dense, rel, rhs)) in rows.into_iter().enumerate() {
            a[i * n..(i + 1) * n].copy_from_slice(&dense);
            let (lo, hi) = match rel {
                Relation::Le => (f64::NEG_INFINITY, rhs),
                Relation::Ge => (rhs, f64::INFINITY),
                Relation::Eq => (rhs, rhs),
            };
            lower[n + i] = lo;
            upper[n + i] = hi;
        }
        let mut cost = vec![0.0; cols];
        for (j, &c) in model.objective().iter().enumerate() {
            cost[j] = sign * c;
        }

        let scale = equilibrate(&mut a, m, n);
        for j in 0..cols {
            lower[j] /= scale[j];
            upper[j] /= scale[j];
            cost[j] *= scale[j];
        }

        let mut engine = Self {
            m,
            n,
            cols,
            a,
            tab: vec![0.0; m * cols],
            d: vec![0.0; cols],
            cost,
            lower,
            upper,
            x: vec![0.0; cols],
            basis: vec![NONBASIC; m],
            row_of: vec![NONBASIC; cols],
            since_refactor: 0,
            singular_events: 0,
            empty_row_violated,
            scratch: vec![0.0; cols],
            nz: Vec::with_capacity(cols),
            scale,
        };
        engine.reset_to_slack_basis();
        engine
    }

    fn reset_to_slack_basis(&mut self) {
        let (m, n, cols) = (self.m, self.n, self.cols);
        self.tab.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for j in 0..n {
                self.tab[i * cols + j] = -self.a[i * n + j];
            }
            self.tab[i * cols + n + i] = 1.0;
        }
        self.row_of.iter_mut().for_each(|r| *r = NONBASIC);
        for i in 0..m {
            self.basis[i] = n + i;
            self.row_of[n + i] = i;
        }
        self.recompute_reduced_costs();
        self.since_refactor = 0;
    }

    pub(crate) fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower / self.scale[col];
        self.upper[col] = upper / self.scale[col];
    }

    pub(crate) fn bounds(&self, col: usize) -> (f64, f64) {
        (self.lower[col] * self.scale[col], self.upper[col] * self.scale[col])
    }

    /// Current basis and the bound each nonbasic column sits on.
    pub(crate) fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            basis: self.basis.clone(),
            at_upper: (0..self.cols)
                .map(|j| !self.is_basic(j) && self.lower[j] < self.upper[j] && self.x[j] == self.upper[j])
                .collect(),
        }
    }

    /// Pivots the columns of `target` into the basis, replacing columns that
    /// are not part of it. Cheaper than a refactorization when the two bases
    /// share most columns. Columns that cannot be pivoted in stably are skipped.
    pub(crate) fn restore(&mut self, snap: &BasisSnapshot) -> MilpResult<()> {
        let cols = self.cols;
        let target = &snap.basis;
        let mut wanted = vec![false; cols];
        for &c in target {
            wanted[c] = true;
        }
        for &c in target {
            if self.is_basic(c) {
                continue;
            }
            let mut best = NONBASIC;
            let mut best_val = 1e-7;
            for i in 0..self.m {
                let v = self.tab[i * cols + c].abs();
                if !wanted[self.basis[i]] && v > best_val {
                    best_val = v;
                    best = i;
                }
            }
            if best != NONBASIC {
                self.pivot(best, c)?;
            }
        }
        for j in 0..cols {
            if !self.is_basic(j) {
                if snap.at_upper[j] {
                    self.x[j] = self.upper[j];
                } else if self.lower[j].is_finite() {
                    self.x[j] = self.lower[j];
                }
            }
        }
        Ok(())
    }

    /// Structural variable values of the current basic solution.
    pub(crate) fn values(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x[j] * self.scale[j]).collect()
    }

    /// Internal (minimization) objective without the model constant.
    pub(crate) fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn is_basic(&self, j: usize) -> bool {
        self.row_of[j] != NONBASIC
    }

    fn recompute_reduced_costs(&mut self) {
        let cols = self.cols;
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * cols..(i + 1) * cols];
                for (dj, &t) in self.d.iter_mut().zip(row) {
                    *dj -= cb * t;
                }
            }
        }
        for i in 0..self.m {
            self.d[self.basis[i]] = 0.0;
        }
    }

    fn recompute_basics(&mut self) {
        let cols = self.cols;
        for i in 0..self.m {
            let row = &self.tab[i * cols..(i + 1) * cols];
            let mut v = 0.0;
            for (j, &t) in row.iter().enumerate() {
                if t != 0.0 && self.row_of[j] == NONBASIC {
                    v -= t * self.x[j];
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    /// Puts every nonbasic variable on a bound. A variable already on a finite
    /// bound stays there if that is dual feasible; otherwise the dual feasible
    /// bound is chosen.
    fn place_nonbasics(&mut self) {
        for j in 0..self.cols {
            if self.is_basic(j) {
                continue;
            }
            let (lo, hi) = (self.lower[j], self.upper[j]);
            self.x[j] = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => {
                    let x = self.x[j];
                    if (x == lo && self.d[j] >= -DUAL_TOL) || (x == hi && self.d[j] <= DUAL_TOL) {
                        x
                    } else if lo == hi || self.d[j] >= 0.0 {
                        lo
                    } else {
                        hi
                    }
                }
                (true, false) => lo,
                (false, true) => hi,
                (false, false) => 0.0,
            };
        }
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - PRIMAL_TOL {
            self.lower[j] - v
        } else if v > self.upper[j] + PRIMAL_TOL {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        self.basis.iter().any(|&b| self.infeasibility(b) > 0.0)
    }

    fn dual_feasible(&self) -> bool {
        (0..self.cols).all(|j| {
            if self.is_basic(j) || self.lower[j] == self.upper[j] {
                return true;
            }
            let dj = self.d[j];
            let can_inc = self.x[j] < self.upper[j];
            let can_dec = self.x[j] > self.lower[j];
            !(can_inc && dj < -DUAL_TOL) && !(can_dec && dj > DUAL_TOL)
        })
    }

    /// Gauss-Jordan elimination on column `q` using row `r`.
    fn eliminate(&mut self, r: usize, q: usize, update_costs: bool) {
        let cols = self.cols;
        let piv = self.tab[r * cols + q];
        let inv = 1.0 / piv;
        self.nz.clear();
        for j in 0..cols {
            let v = &mut self.tab[r * cols + j];
            if *v != 0.0 {
                *v *= inv;
                if v.abs() < ZERO_SNAP {
                    *v = 0.0;
                } else {
                    self.nz.push(j);
                }
            }
        }
        self.tab[r * cols + q] = 1.0;
        self.scratch[..cols].copy_from_slice(&self.tab[r * cols..(r + 1) * cols]);
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * cols + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * cols..(i + 1) * cols];
            for &j in &self.nz {
                let v = row[j] - f * self.scratch[j];
                row[j] = if v.abs() < ZERO_SNAP { 0.0 } else { v };
            }
            row[q] = 0.0;
        }
        if update_costs {
            let f = self.d[q];
            if f != 0.0 {
                for &j in &self.nz {
                    self.d[j] -= f * self.scratch[j];
                }
            }
            self.d[q] = 0.0;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) -> MilpResult<()> {
        let old = self.basis[r];
        self.eliminate(r, q, true);
        self.row_of[old] = NONBASIC;
        self.basis[r] = q;
        self.row_of[q] = r;
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Rebuilds the tableau from the original matrix for the current basis.
    /// Falls back to the slack basis when the basis has become singular.
    fn refactor(&mut self) -> MilpResult<()> {
        let (m, n, cols) = (self.m, self.n, self.cols);
        let old_basis = self.basis.clone();
        self.tab.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            for j in 0..n {
                self.tab[i * cols + j] = self.a[i * n + j];
            }
            self.tab[i * cols + n + i] = -1.0;
        }
        let mut order: Vec<usize> = old_basis.clone();
        // Row-variable columns are unit vectors: eliminating them first is free.
        order.sort_by_key(|&c| if c >= n { (0, c) } else { (1, c) });
        let mut assigned = vec![false; m];
        let mut new_basis = vec![NONBASIC; m];
        let mut dropped = 0;
        for &c in &order {
            let mut best = NONBASIC;
            let mut best_val = SINGULAR_TOL;
            for i in 0..m {
                if !assigned[i] {
                    let v = self.tab[i * cols + c].abs();
                    if v > best_val {
                        best_val = v;
                        best = i;
                    }
                }
            }
            if best == NONBASIC {
                dropped += 1;
                continue;
            }
            self.eliminate(best, c, false);
            assigned[best] = true;
            new_basis[best] = c;
        }
        if dropped > 0 {
            self.singular_events += 1;
            if self.singular_events > 20 {
                return Err(MilpError::NumericalInstability(
                    "basis matrix repeatedly singular during refactorization".into(),
                ));
            }
            // replace dependent columns by the best nonbasic column of each
            // uncovered row, preferring that row's own row variable
            for r in 0..m {
                if assigned[r] {
                    continue;
                }
                let in_basis = |c: usize| new_basis.contains(&c);
                let own = n + r;
                let pick = if !in_basis(own) && self.tab[r * cols + own].abs() > 1e-7 {
                    own
                } else {
                    let mut best = (0.0, NONBASIC);
                    for c in 0..cols {
                        let v = self.tab[r * cols + c].abs();
                        if v > best.0 && !in_basis(c) {
                            best = (v, c);
                        }
                    }
                    if best.1 == NONBASIC || best.0 <= SINGULAR_TOL {
                        return Err(MilpError::NumericalInstability("basis repair found no pivot".into()));
                    }
                    best.1
                };
                self.eliminate(r, pick, false);
                assigned[r] = true;
                new_basis[r] = pick;
            }
        }
        self.row_of.iter_mut().for_each(|r| *r = NONBASIC);
        for (i, &c) in new_basis.iter().enumerate() {
            self.row_of[c] = i;
        }
        self.basis = new_basis;
        self.recompute_reduced_costs();
        if dropped > 0 {
            self.place_nonbasics();
        }
        self.recompute_basics();
        self.since_refactor = 0;
        Ok(())
    }

    /// Worst residual of `A x - r` against the original matrix.
    fn residual(&self) -> f64 {
        let n = self.n;
        (0..self.m)
            .map(|i| {
                let lhs: f64 = (0..n).map(|j| self.a[i * n + j] * self.x[j]).sum();
                (lhs - self.x[n + i]).abs() / (1.0 + lhs.abs())
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn solve(&mut self) -> MilpResult<LpStatus> {
        if self.empty_row_violated {
            return Ok(LpStatus::Infeasible);
        }
        if (0..self.cols).any(|j| self.lower[j] > self.upper[j] + PRIMAL_TOL) {
            return Ok(LpStatus::Infeasible);
        }
        let budget = 50_000 + 50 * (self.m + self.cols);
        let mut used = 0usize;
        self.singular_events = 0;
        self.place_nonbasics();
        self.recompute_basics();

        for _attempt in 0..4 {
            if self.primal_infeasible() {
                if self.dual_feasible() {
                    match self.dual(budget, &mut used)? {
                        LpStatus::Infeasible => return Ok(LpStatus::Infeasible),
                        LpStatus::IterationLimit => return Ok(LpStatus::IterationLimit),
                        _ => {}
                    }
                }
                if self.primal_infeasible() {
                    match self.primal(true, budget, &mut used)? {
                        LpStatus::Optimal => {}
                        other => return Ok(other),
                    }
                }
            }
            let status = self.primal(false, budget, &mut used)?;
            if status != LpStatus::Optimal {
                return Ok(status);
            }
            self.recompute_basics();
            if self.residual() > 1e-7 {
                self.refactor()?;
                continue;
            }
            if !self.primal_infeasible() {
                return Ok(LpStatus::Optimal);
            }
        }
        Err(MilpError::NumericalInstability(
            "simplex failed to reach a clean optimal basis".into(),
        ))
    }

    /// Bound that basic variable `b` runs into when it moves in the direction
    /// of `alpha`; `cls` is its phase-one class (-1 below, +1 above, 0 inside).
    fn ratio_target(&self, b: usize, alpha: f64, cls: i8) -> Option<f64> {
        let target = if alpha > 0.0 {
            match cls {
                -1 => self.lower[b],
                1 => return None,
                _ => self.upper[b],
            }
        } else {
            match cls {
                1 => self.upper[b],
                -1 => return None,
                _ => self.lower[b],
            }
        };
        target.is_finite().then_some(target)
    }

    /// Primal simplex. In phase one the objective is the sum of bound
    /// violations of basic variables, recomputed every iteration.
    fn primal(&mut self, phase_one: bool, budget: usize, used: &mut usize) -> MilpResult<LpStatus> {
        let (m, cols) = (self.m, self.cols);
        let mut bland = false;
        let mut stall = 0usize;
        let stall_limit = 2 * (m + cols);
        // -1 below lower, +1 above upper, 0 feasible
        let mut class = vec![0i8; m];
        let mut d1 = vec![0.0; cols];
        // columns whose phase-one ray turned out to be unbounded (numerical noise)
        let mut banned = vec![false; cols];

        loop {
            if *used >= budget {
                return Ok(LpStatus::IterationLimit);
            }
            *used += 1;

            if phase_one {
                let mut any = false;
                for i in 0..m {
                    let b = self.basis[i];
                    class[i] = if self.x[b] < self.lower[b] - PRIMAL_TOL {
                        -1
                    } else if self.x[b] > self.upper[b] + PRIMAL_TOL {
                        1
                    } else {
                        0
                    };
                    any |= class[i] != 0;
                }
                if !any {
                    return Ok(LpStatus::Optimal);
                }
                d1.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..m {
                    if class[i] != 0 {
                        let w = class[i] as f64;
                        let row = &self.tab[i * cols..(i + 1) * cols];
                        for (dj, &t) in d1.iter_mut().zip(row) {
                            *dj -= w * t;
                        }
                    }
                }
            }
            let d = if phase_one { &d1 } else { &self.d };

            // entering variable
            let mut enter = NONBASIC;
            let mut dir = 0.0;
            let mut best_score = 0.0;
            for j in 0..cols {
                if self.row_of[j] != NONBASIC || self.lower[j] == self.upper[j] || banned[j] {
                    continue;
                }
                let dj = d[j];
                let (cand_dir, score) = if dj < -DUAL_TOL && self.x[j] < self.upper[j] {
                    (1.0, -dj)
                } else if dj > DUAL_TOL && self.x[j] > self.lower[j] {
                    (-1.0, dj)
                } else {
                    continue;
                };
                if bland {
                    enter = j;
                    dir = cand_dir;
                    break;
                }
                if score > best_score {
                    best_score = score;
                    enter = j;
                    dir = cand_dir;
                }
            }
            if enter == NONBASIC {
                return Ok(if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                });
            }
            let q = enter;
            let dq = d[q];

            // Harris ratio test: bound the step with tolerance-relaxed targets,
            // then take the largest pivot among rows blocking within that bound.
            let range = self.upper[q] - self.lower[q];
            let mut bound = range;
            for i in 0..m {
                let alpha = -self.tab[i * cols + q] * dir;
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let cls = if phase_one { class[i] } else { 0 };
                if let Some(target) = self.ratio_target(b, alpha, cls) {
                    let slack = match (bland, alpha > 0.0) {
                        (true, _) => 0.0,
                        (false, true) => PRIMAL_TOL,
                        (false, false) => -PRIMAL_TOL,
                    };
                    let t = ((target + slack - self.x[b]) / alpha).max(0.0);
                    if t < bound || !bound.is_finite() {
                        bound = t;
                    }
                }
            }
            let mut step = range;
            let mut leave = NONBASIC;
            let mut leave_alpha = 0.0;
            let mut leave_target = 0.0;
            if bound.is_finite() {
                for i in 0..m {
                    let alpha = -self.tab[i * cols + q] * dir;
                    if alpha.abs() < PIVOT_TOL {
                        continue;
                    }
                    let b = self.basis[i];
                    let cls = if phase_one { class[i] } else { 0 };
                    let Some(target) = self.ratio_target(b, alpha, cls) else {
                        continue;
                    };
                    let t = ((target - self.x[b]) / alpha).max(0.0);
                    if t > bound {
                        continue;
                    }
                    let better = if leave == NONBASIC {
                        true
                    } else if bland {
                        b < self.basis[leave]
                    } else {
                        alpha.abs() > leave_alpha
                    };
                    if better {
                        leave = i;
                        leave_alpha = alpha.abs();
                        leave_target = target;
                        step = t;
                    }
                }
                if leave != NONBASIC && range <= step {
                    // the entering variable reaches its own bound first
                    leave = NONBASIC;
                    step = range;
                }
            }

            if !step.is_finite() {
                if phase_one {
                    banned[q] = true;
                    continue;
                }
                return Ok(LpStatus::Unbounded);
            }

            if (dq * step).abs() > DUAL_TOL {
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }

            // move
            if step > 0.0 {
                self.x[q] += dir * step;
                for i in 0..m {
                    let t = self.tab[i * cols + q];
                    if t != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= t * dir * step;
                    }
                }
            }
            if leave == NONBASIC {
                self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                continue;
            }
            let b = self.basis[leave];
            self.x[b] = leave_target;
            self.pivot(leave, q)?;
            banned.iter_mut().for_each(|v| *v = false);
        }
    }

    /// Dual simplex from a dual feasible basis.
    fn dual(&mut self, budget: usize, used: &mut usize) -> MilpResult<LpStatus> {
        let (m, cols) = (self.m, self.cols);
        let mut bland = false;
        let mut stall = 0usize;
        let stall_limit = 2 * (m + cols);
        loop {
            if *used >= budget {
                return Ok(LpStatus::IterationLimit);
            }
            *used += 1;

            let mut leave = NONBASIC;
            let mut worst = 0.0;
            for i in 0..m {
                let inf = self.infeasibility(self.basis[i]);
                if inf <= 0.0 {
                    continue;
                }
                if bland {
                    if leave == NONBASIC || self.basis[i] < self.basis[leave] {
                        leave = i;
                    }
                    continue;
                }
                // dual steepest edge: the row of B⁻¹ sits under the row-variable columns
                let w: f64 = self.tab[i * cols + self.n..(i + 1) * cols].iter().map(|t| t * t).sum();
                let score = inf * inf / w.max(1e-12);
                if score > worst {
                    worst = score;
                    leave = i;
                }
            }
            if leave == NONBASIC {
                return Ok(LpStatus::Optimal);
            }
            let r = leave;
            let b = self.basis[r];
            let below = self.x[b] < self.lower[b];
            let target = if below { self.lower[b] } else { self.upper[b] };
            // x_b moves by -T_rj per unit increase of x_j; want +1 (below) or -1 (above).
            let want = if below { 1.0 } else { -1.0 };

            // Harris ratio test over the eligible columns
            let eligible = |eng: &Self, j: usize| -> Option<f64> {
                if eng.row_of[j] != NONBASIC || eng.lower[j] == eng.upper[j] {
                    return None;
                }
                let t = eng.tab[r * cols + j];
                if t.abs() < PIVOT_TOL {
                    return None;
                }
                let rate_up = -t * want;
                let ok = (rate_up > 0.0 && eng.x[j] < eng.upper[j]) || (rate_up < 0.0 && eng.x[j] > eng.lower[j]);
                ok.then_some(t)
            };
            // Bland mode uses the exact minimum ratio, ties to the lowest index
            let relax = if bland { 0.0 } else { DUAL_TOL };
            let mut bound = f64::INFINITY;
            for j in 0..cols {
                if let Some(t) = eligible(self, j) {
                    bound = bound.min((self.d[j].abs() + relax) / t.abs());
                }
            }
            let mut enter = NONBASIC;
            let mut best_ratio = f64::INFINITY;
            let mut best_mag = 0.0;
            for j in 0..cols {
                let Some(t) = eligible(self, j) else {
                    continue;
                };
                let ratio = self.d[j].abs() / t.abs();
                if ratio > bound {
                    continue;
                }
                let better = if enter == NONBASIC {
                    true
                } else if bland {
                    j < enter
                } else {
                    t.abs() > best_mag
                };
                if better {
                    best_ratio = ratio;
                    best_mag = t.abs();
                    enter = j;
                }
            }
            if enter == NONBASIC {
                return Ok(LpStatus::Infeasible);
            }
            if best_ratio > DUAL_TOL {
                stall = 0;
            } else {
                stall += 1;
                if stall > stall_limit {
                    bland = true;
                }
            }
            let q = enter;
            let t_rq = self.tab[r * cols + q];
            let delta = (self.x[b] - target) / t_rq;
            self.x[q] += delta;
            for i in 0..m {
                let t = self.tab[i * cols + q];
                if t != 0.0 {
                    let bi = self.basis[i];
                    self.x[bi] -= t * delta;
                }
            }
            self.x[b] = target;
            self.pivot(r, q)?;
        }
    }
}

/// Geometric-mean row and column scaling of the `m × n` matrix `a`, in place,
/// with power-of-two factors so scaled bounds stay exact. Returns the factor
/// of every column of `[A | -I]`: structural columns get their column factor,
/// row variables the inverse of their row factor.
fn equilibrate(a: &mut [f64], m: usize, n: usize) -> Vec<f64> {
    let mut row = vec![1.0; m];
    let mut col = vec![1.0; n];
    let pow2 = |v: f64| 2f64.powi(v.log2().round() as i32);
    for _ in 0..4 {
        for (i, r) in row.iter_mut().enumerate() {
            let (lo, hi) = extent((0..n).map(|j| a[i * n + j] * *r * col[j]));
            if hi > 0.0 {
                *r *= pow2(1.0 / (lo * hi).sqrt());
            }
        }
        for (j, c) in col.iter_mut().enumerate() {
            let (lo, hi) = extent((0..m).map(|i| a[i * n + j] * row[i] * *c));
            if hi > 0.0 {
                *c *= pow2(1.0 / (lo * hi).sqrt());
            }
        }
    }
    for i in 0..m {
        for j in 0..n {
            a[i * n + j] *= row[i] * col[j];
        }
    }
    col.extend(row.iter().map(|r| 1.0 / r));
    col
}

/// Smallest and largest nonzero magnitude.
fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values
        .filter(|v| *v != 0.0)
        .fold((f64::INFINITY, 0.0), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MilpModel, Relation, Sense};

    #[test]
    fn warm_restart_after_bound_change() {
        // max x + y, x + 2y <= 4, 3x + y <= 6
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        let y = m.add_continuous("y", 0.0, f64::INFINITY);
        m.add_objective_term(x, 1.0);
        m.add_objective_term(y, 1.0);
        m.add_constraint("c1", vec![(x, 1.0), (y, 2.0)], Relation::Le, 4.0);
        m.add_constraint("c2", vec![(x, 3.0), (y, 1.0)], Relation::Le, 6.0);
        let mut e = LpEngine::new(&m);
        assert_eq!(e.solve().unwrap(), LpStatus::Optimal);
        assert!((e.objective() + 2.8).abs() < 1e-9);
        e.set_bounds(0, 0.0, 1.0);
        assert_eq!(e.solve().unwrap(), LpStatus::Optimal);
        assert!((e.objective() + 2.5).abs() < 1e-9);
        e.set_bounds(0, 0.0, f64::INFINITY);
        assert_eq!(e.solve().unwrap(), LpStatus::Optimal);
        assert!((e.objective() + 2.8).abs() < 1e-9);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x, x - y = 3, y free, y >= -1 via row
        let mut m = MilpModel::new(Sense::Minimize);
        let x = m.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = m.add_continuous("y", f64::NEG_INFINITY, f64::INFINITY);
        m.add_objective_term(x, 1.0);
        m.add_constraint("eq", vec![(x, 1.0), (y, -1.0)], Relation::Eq, 3.0);
        m.add_constraint("ylo", vec![(y, 1.0)], Relation::Ge, -1.0);
        let mut e = LpEngine::new(&m);
        assert_eq!(e.solve().unwrap(), LpStatus::Optimal);
        assert!((e.values()[0] - 2.0).abs() < 1e-9);
        assert!((e.values()[1] + 1.0).abs() < 1e-9);
    }
}
