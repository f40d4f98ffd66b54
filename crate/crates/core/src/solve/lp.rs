//! Bounded-variable revised simplex.
//!
//! Every row `a x (<=|=|>=) b` gets a slack column so the working system is
//! `A x + s = b` with the row sense moved into the slack bounds. The basis
//! inverse is kept dense and updated in product form, refactorized every
//! [`REFACTOR_EVERY`] pivots. Cold solves run a two-phase primal method with
//! artificial columns; warm solves after bound changes run the dual simplex
//! followed by a primal clean-up pass.

use serde::{Deserialize, Serialize};

use crate::mip::{ConSense, MipInstance};

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const BLAND_AFTER: usize = 50;
const REFACTOR_EVERY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable held at zero.
    Free,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// Objective in the instance's own sense; NaN unless optimal.
    pub objective: f64,
    /// `c_j - y^T a_j` in the instance's own sense.
    pub reduced_costs: Vec<f64>,
    pub duals: Vec<f64>,
    pub var_status: Vec<VarStatus>,
    pub iterations: usize,
}

/// The simplex lost numerical control (singular basis, iteration cap).
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("simplex numerical failure: {0}")]
pub struct LpFailure(pub String);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum St {
    Basic(usize),
    Lower,
    Upper,
    Free,
}

/// Basis that can be reinstalled into the [`Simplex`] it was taken from.
#[derive(Clone, Debug)]
pub struct BasisSnapshot {
    generation: u64,
    basis: Vec<usize>,
    status: Vec<St>,
}

#[derive(Clone, Debug)]
pub struct Simplex {
    m: usize,
    n_struct: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<St>,
    x: Vec<f64>,
    binv: Vec<f64>,
    since_refactor: usize,
    generation: u64,
    sign: f64,
    has_basis: bool,
    pub iterations: usize,
}

impl Simplex {
    pub fn new(mip: &MipInstance) -> Self {
        let m = mip.cons.len();
        let n = mip.vars.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n + m];
        for (r, con) in mip.cons.iter().enumerate() {
            for &(j, a) in &con.terms {
                if a != 0.0 {
                    cols[j].push((r, a));
                }
            }
            cols[n + r].push((r, 1.0));
        }
        let sign = mip.sense.sign();
        let mut cost: Vec<f64> = mip.vars.iter().map(|v| sign * v.obj_coeff).collect();
        let mut lb: Vec<f64> = mip.vars.iter().map(|v| v.lb).collect();
        let mut ub: Vec<f64> = mip.vars.iter().map(|v| v.ub).collect();
        for con in &mip.cons {
            cost.push(0.0);
            let (l, u) = match con.sense {
                ConSense::Le => (0.0, f64::INFINITY),
                ConSense::Ge => (f64::NEG_INFINITY, 0.0),
                ConSense::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }
        let total = n + m;
        Simplex {
            m,
            n_struct: n,
            cols,
            cost,
            lb,
            ub,
            rhs: mip.cons.iter().map(|c| c.rhs).collect(),
            basis: Vec::new(),
            status: vec![St::Lower; total],
            x: vec![0.0; total],
            binv: Vec::new(),
            since_refactor: 0,
            generation: 0,
            sign,
            has_basis: false,
            iterations: 0,
        }
    }

    pub fn num_struct(&self) -> usize {
        self.n_struct
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lb[j], self.ub[j])
    }

    /// Objective of the current point in minimization form.
    pub fn min_objective(&self) -> f64 {
        (0..self.n_struct).map(|j| self.cost[j] * self.x[j]).sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n_struct]
    }

    /// Changes the bounds of a structural column, moving it if nonbasic.
    pub fn set_var_bounds(&mut self, j: usize, lb: f64, ub: f64) {
        assert!(j < self.n_struct);
        self.lb[j] = lb;
        self.ub[j] = ub;
        if !self.has_basis {
            return;
        }
        let target = match self.status[j] {
            St::Basic(_) => return,
            St::Lower if lb.is_finite() => lb,
            St::Upper if ub.is_finite() => ub,
            _ => {
                self.status[j] = nonbasic_status(lb, ub);
                nonbasic_value(self.status[j], lb, ub)
            }
        };
        let delta = target - self.x[j];
        if delta != 0.0 {
            self.x[j] = target;
            let alpha = self.ftran(j);
            for (i, a) in alpha.iter().enumerate() {
                self.x[self.basis[i]] -= a * delta;
            }
        }
    }

    pub fn snapshot(&self) -> Option<BasisSnapshot> {
        self.has_basis.then(|| BasisSnapshot {
            generation: self.generation,
            basis: self.basis.clone(),
            status: self.status.clone(),
        })
    }

    /// Reinstalls a basis taken earlier. Current bounds are kept; nonbasic
    /// columns are moved onto them. Returns false when the snapshot is stale
    /// or its basis matrix is singular.
    pub fn restore(&mut self, snap: &BasisSnapshot) -> bool {
        if snap.generation != self.generation || snap.status.len() != self.cols.len() {
            return false;
        }
        self.basis = snap.basis.clone();
        self.status = snap.status.clone();
        for j in 0..self.cols.len() {
            match self.status[j] {
                St::Basic(_) => {}
                St::Lower if self.lb[j].is_finite() => self.x[j] = self.lb[j],
                St::Upper if self.ub[j].is_finite() => self.x[j] = self.ub[j],
                _ => {
                    self.status[j] = nonbasic_status(self.lb[j], self.ub[j]);
                    self.x[j] = nonbasic_value(self.status[j], self.lb[j], self.ub[j]);
                }
            }
        }
        self.has_basis = true;
        if !self.refactor() {
            self.has_basis = false;
            return false;
        }
        self.recompute_basic_values();
        true
    }

    /// Two-phase primal simplex from a slack/artificial basis.
    pub fn solve_cold(&mut self) -> Result<LpStatus, LpFailure> {
        let total = self.n_struct + self.m;
        self.cols.truncate(total);
        self.cost.truncate(total);
        self.lb.truncate(total);
        self.ub.truncate(total);
        self.status.truncate(total);
        self.x.truncate(total);
        self.generation += 1;

        for j in 0..self.n_struct {
            self.status[j] = nonbasic_status(self.lb[j], self.ub[j]);
            self.x[j] = nonbasic_value(self.status[j], self.lb[j], self.ub[j]);
        }
        let mut residual = self.rhs.clone();
        for j in 0..self.n_struct {
            if self.x[j] != 0.0 {
                for &(r, a) in &self.cols[j] {
                    residual[r] -= a * self.x[j];
                }
            }
        }
        self.basis = vec![0; self.m];
        self.binv = vec![0.0; self.m * self.m];
        let mut artificials = Vec::new();
        for r in 0..self.m {
            let s = self.n_struct + r;
            let res = residual[r];
            if res >= self.lb[s] - PRIMAL_TOL && res <= self.ub[s] + PRIMAL_TOL {
                self.status[s] = St::Basic(r);
                self.x[s] = res;
                self.basis[r] = s;
                self.binv[r * self.m + r] = 1.0;
            } else {
                let v = if res < self.lb[s] {
                    self.lb[s]
                } else {
                    self.ub[s]
                };
                self.status[s] = if v == self.lb[s] {
                    St::Lower
                } else {
                    St::Upper
                };
                self.x[s] = v;
                let gap = res - v;
                let coef = gap.signum();
                let a = self.cols.len();
                self.cols.push(vec![(r, coef)]);
                self.cost.push(0.0);
                self.lb.push(0.0);
                self.ub.push(f64::INFINITY);
                self.status.push(St::Basic(r));
                self.x.push(gap.abs());
                self.basis[r] = a;
                self.binv[r * self.m + r] = coef;
                artificials.push(a);
            }
        }
        self.has_basis = true;
        self.since_refactor = 0;

        if !artificials.is_empty() {
            let mut phase1 = vec![0.0; self.cols.len()];
            for &a in &artificials {
                phase1[a] = 1.0;
            }
            match self.primal(&phase1)? {
                LpStatus::Optimal => {}
                _ => {
                    return Err(LpFailure(
                        "phase one did not terminate at an optimum".into(),
                    ))
                }
            }
            let infeas: f64 = artificials.iter().map(|&a| self.x[a]).sum();
            let scale = 1.0 + self.rhs.iter().fold(0.0f64, |acc, b| acc.max(b.abs()));
            if infeas > 1e-7 * scale {
                return Ok(LpStatus::Infeasible);
            }
            for &a in &artificials {
                self.ub[a] = 0.0;
                if !matches!(self.status[a], St::Basic(_)) {
                    self.status[a] = St::Lower;
                    self.x[a] = 0.0;
                }
            }
        }
        let cost = self.cost.clone();
        self.primal(&cost)
    }

    /// Dual simplex from the installed basis, then primal clean-up. Falls back
    /// to a cold solve when the basis is missing or not dual feasible.
    pub fn solve_warm(&mut self) -> Result<LpStatus, LpFailure> {
        if !self.has_basis {
            return self.solve_cold();
        }
        let cost = self.cost.clone();
        if !self.dual_feasible(&cost) {
            return self.solve_cold();
        }
        match self.dual(&cost) {
            Ok(LpStatus::Optimal) => match self.primal(&cost) {
                Ok(status) => Ok(status),
                Err(_) => self.solve_cold(),
            },
            Ok(status) => Ok(status),
            Err(_) => self.solve_cold(),
        }
    }

    /// Packages the current point. Values are in the instance's own sense.
    pub fn solution(&self, status: LpStatus) -> LpSolution {
        let n = self.n_struct;
        let var_status = (0..n)
            .map(|j| match self.status[j] {
                St::Basic(_) => VarStatus::Basic,
                St::Lower => VarStatus::AtLower,
                St::Upper => VarStatus::AtUpper,
                St::Free => VarStatus::Free,
            })
            .collect();
        if status != LpStatus::Optimal {
            return LpSolution {
                status,
                primal: self.x[..n].to_vec(),
                objective: f64::NAN,
                reduced_costs: vec![f64::NAN; n],
                duals: vec![f64::NAN; self.m],
                var_status,
                iterations: self.iterations,
            };
        }
        let y = self.duals(&self.cost);
        let reduced_costs = (0..n)
            .map(|j| self.sign * self.reduced_cost(&self.cost, &y, j))
            .collect();
        LpSolution {
            status,
            primal: self.x[..n].to_vec(),
            objective: self.sign * self.min_objective(),
            reduced_costs,
            duals: y.iter().map(|v| self.sign * v).collect(),
            var_status,
            iterations: self.iterations,
        }
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.m + self.cols.len()) + 1000
    }

    fn duals(&self, c: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for i in 0..m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, bk) in y.iter_mut().zip(row) {
                    *yk += cb * bk;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, c: &[f64], y: &[f64], j: usize) -> f64 {
        c[j] - self.cols[j].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut out = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.binv[i * m + r] * a;
            }
        }
        out
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_mut(m).enumerate() {
            let f = alpha[i];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        for (off, row) in after.chunks_mut(m).enumerate() {
            let f = alpha[r + 1 + off];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * p;
                }
            }
        }
        self.basis[r] = q;
        self.status[q] = St::Basic(r);
        self.since_refactor += 1;
        self.iterations += 1;
    }

    /// Inverts the basis matrix from scratch (Gauss-Jordan, partial pivoting).
    fn refactor(&mut self) -> bool {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (c, &j) in self.basis.iter().enumerate() {
            for &(r, v) in &self.cols[j] {
                a[r * m + c] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for col in 0..m {
            let mut best = col;
            let mut best_abs = a[col * m + col].abs();
            for r in col + 1..m {
                let v = a[r * m + col].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs < 1e-12 {
                return false;
            }
            if best != col {
                for k in 0..m {
                    a.swap(col * m + k, best * m + k);
                    inv.swap(col * m + k, best * m + k);
                }
            }
            let p = a[col * m + col];
            for k in 0..m {
                a[col * m + k] /= p;
                inv[col * m + k] /= p;
            }
            let prow_a: Vec<f64> = a[col * m..(col + 1) * m].to_vec();
            let prow_i: Vec<f64> = inv[col * m..(col + 1) * m].to_vec();
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = a[r * m + col];
                if f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * prow_a[k];
                        inv[r * m + k] -= f * prow_i[k];
                    }
                }
            }
        }
        // Rows of `inv` follow the column order of B, i.e. basis positions.
        self.binv = inv;
        self.since_refactor = 0;
        true
    }

    fn recompute_basic_values(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.cols.len() {
            if matches!(self.status[j], St::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            for &(row, a) in &self.cols[j] {
                r[row] -= a * self.x[j];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(b, rv)| b * rv).sum();
            self.x[self.basis[i]] = v;
        }
    }

    fn maybe_refactor(&mut self) -> Result<(), LpFailure> {
        if self.since_refactor >= REFACTOR_EVERY {
            if !self.refactor() {
                return Err(LpFailure("singular basis during refactorization".into()));
            }
            self.recompute_basic_values();
        }
        Ok(())
    }

    fn dual_feasible(&self, c: &[f64]) -> bool {
        let y = self.duals(c);
        (0..self.cols.len()).all(|j| {
            if self.lb[j] == self.ub[j] {
                return true;
            }
            let d = self.reduced_cost(c, &y, j);
            match self.status[j] {
                St::Basic(_) => true,
                St::Lower => d >= -1e-7,
                St::Upper => d <= 1e-7,
                St::Free => d.abs() <= 1e-7,
            }
        })
    }

    fn primal(&mut self, c: &[f64]) -> Result<LpStatus, LpFailure> {
        let cap = self.iteration_cap();
        let mut degenerate = 0usize;
        let mut bland = false;
        for _ in 0..cap {
            self.maybe_refactor()?;
            let y = self.duals(c);

            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.cols.len() {
                if self.lb[j] == self.ub[j] {
                    continue;
                }
                let dir = match self.status[j] {
                    St::Basic(_) => continue,
                    St::Lower => {
                        let d = self.reduced_cost(c, &y, j);
                        if d < -DUAL_TOL {
                            Some((1.0, -d))
                        } else {
                            None
                        }
                    }
                    St::Upper => {
                        let d = self.reduced_cost(c, &y, j);
                        if d > DUAL_TOL {
                            Some((-1.0, d))
                        } else {
                            None
                        }
                    }
                    St::Free => {
                        let d = self.reduced_cost(c, &y, j);
                        if d.abs() > DUAL_TOL {
                            Some((-d.signum(), d.abs()))
                        } else {
                            None
                        }
                    }
                };
                if let Some((dir, score)) = dir {
                    if bland {
                        entering = Some((j, dir));
                        break;
                    }
                    if score > best {
                        best = score;
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = entering else {
                return Ok(LpStatus::Optimal);
            };

            let alpha = self.ftran(q);
            let mut step = f64::INFINITY;
            let mut leave: Option<(usize, bool)> = None;
            let mut leave_key = (0.0f64, usize::MAX);
            for (i, &a) in alpha.iter().enumerate() {
                let delta = -dir * a;
                let b = self.basis[i];
                let (t, to_lower) = if delta < -PIVOT_TOL && self.lb[b].is_finite() {
                    (((self.x[b] - self.lb[b]) / -delta).max(0.0), true)
                } else if delta > PIVOT_TOL && self.ub[b].is_finite() {
                    (((self.ub[b] - self.x[b]) / delta).max(0.0), false)
                } else {
                    continue;
                };
                let better = if t < step - DEGENERATE_STEP {
                    true
                } else if t <= step + DEGENERATE_STEP {
                    if bland {
                        b < leave_key.1
                    } else {
                        a.abs() > leave_key.0
                    }
                } else {
                    false
                };
                if better {
                    step = step.min(t);
                    leave = Some((i, to_lower));
                    leave_key = (a.abs(), b);
                }
            }
            let flip = self.ub[q] - self.lb[q];
            if flip.is_finite() && flip <= step {
                self.x[q] += dir * flip;
                for (i, &a) in alpha.iter().enumerate() {
                    self.x[self.basis[i]] -= dir * a * flip;
                }
                self.status[q] = if dir > 0.0 { St::Upper } else { St::Lower };
                self.iterations += 1;
                degenerate = 0;
                bland = false;
                continue;
            }
            let Some((r, to_lower)) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            self.x[q] += dir * step;
            for (i, &a) in alpha.iter().enumerate() {
                self.x[self.basis[i]] -= dir * a * step;
            }
            let b = self.basis[r];
            if to_lower {
                self.x[b] = self.lb[b];
                self.status[b] = St::Lower;
            } else {
                self.x[b] = self.ub[b];
                self.status[b] = St::Upper;
            }
            self.pivot(r, q, &alpha);
            if step <= DEGENERATE_STEP {
                degenerate += 1;
                if degenerate > BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
        Err(LpFailure("primal simplex iteration cap reached".into()))
    }

    fn dual(&mut self, c: &[f64]) -> Result<LpStatus, LpFailure> {
        let m = self.m;
        let cap = self.iteration_cap();
        let mut degenerate = 0usize;
        let mut bland = false;
        for _ in 0..cap {
            self.maybe_refactor()?;
            let mut leave: Option<(usize, bool)> = None;
            let mut worst = 0.0;
            let mut leave_var = usize::MAX;
            for i in 0..m {
                let b = self.basis[i];
                let below = self.lb[b] - self.x[b];
                let above = self.x[b] - self.ub[b];
                let (infeas, to_lower) = if below > PRIMAL_TOL {
                    (below, true)
                } else if above > PRIMAL_TOL {
                    (above, false)
                } else {
                    continue;
                };
                let take = if bland { b < leave_var } else { infeas > worst };
                if take {
                    worst = infeas;
                    leave_var = b;
                    leave = Some((i, to_lower));
                }
            }
            let Some((r, to_lower)) = leave else {
                return Ok(LpStatus::Optimal);
            };

            let y = self.duals(c);
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            let mut entering: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0f64;
            for j in 0..self.cols.len() {
                if self.lb[j] == self.ub[j] {
                    continue;
                }
                let st = self.status[j];
                if matches!(st, St::Basic(_)) {
                    continue;
                }
                let arj: f64 = self.cols[j].iter().map(|&(k, a)| rho[k] * a).sum();
                if arj.abs() <= PIVOT_TOL {
                    continue;
                }
                let d = self.reduced_cost(c, &y, j);
                let eligible = match (st, to_lower) {
                    (St::Lower, true) => arj < 0.0,
                    (St::Upper, true) => arj > 0.0,
                    (St::Lower, false) => arj > 0.0,
                    (St::Upper, false) => arj < 0.0,
                    (St::Free, _) => true,
                    (St::Basic(_), _) => false,
                };
                if !eligible {
                    continue;
                }
                let ratio = (d.abs() / arj.abs()).max(0.0);
                let better = if ratio < best_ratio - DEGENERATE_STEP {
                    true
                } else if ratio <= best_ratio + DEGENERATE_STEP {
                    if bland {
                        entering.is_none_or(|e| j < e)
                    } else {
                        arj.abs() > best_alpha
                    }
                } else {
                    false
                };
                if better {
                    best_ratio = best_ratio.min(ratio);
                    best_alpha = arj.abs();
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return Ok(LpStatus::Infeasible);
            };

            let alpha = self.ftran(q);
            if alpha[r].abs() <= PIVOT_TOL {
                return Err(LpFailure("dual pivot element vanished".into()));
            }
            let b = self.basis[r];
            let target = if to_lower { self.lb[b] } else { self.ub[b] };
            let dq = (self.x[b] - target) / alpha[r];
            self.x[q] += dq;
            for (i, &a) in alpha.iter().enumerate() {
                self.x[self.basis[i]] -= a * dq;
            }
            self.x[b] = target;
            self.status[b] = if to_lower { St::Lower } else { St::Upper };
            self.pivot(r, q, &alpha);
            if best_ratio <= DEGENERATE_STEP {
                degenerate += 1;
                if degenerate > BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
        }
        Err(LpFailure("dual simplex iteration cap reached".into()))
    }
}

fn nonbasic_status(lb: f64, ub: f64) -> St {
    if lb.is_finite() {
        St::Lower
    } else if ub.is_finite() {
        St::Upper
    } else {
        St::Free
    }
}

fn nonbasic_value(st: St, lb: f64, ub: f64) -> f64 {
    match st {
        St::Lower => lb,
        St::Upper => ub,
        _ => 0.0,
    }
}

/// Solves the continuous relaxation of `mip`.
pub fn solve_lp(mip: &MipInstance) -> Result<LpSolution, super::SolveError> {
    crate::mip::validate(mip).into_result()?;
    let mut simplex = Simplex::new(mip);
    let status = simplex.solve_cold()?;
    Ok(simplex.solution(status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mip::{Constraint, Sense, Variable};

    fn lp(sense: Sense, vars: Vec<Variable>, cons: Vec<Constraint>) -> MipInstance {
        MipInstance {
            name: "lp".into(),
            sense,
            vars,
            cons,
        }
    }

    #[test]
    fn single_bounded_variable() {
        let m = lp(
            Sense::Min,
            vec![Variable::continuous("x", 0.0, 10.0, 1.0)],
            vec![Constraint::new("c", vec![(0, 1.0)], ConSense::Ge, 1.0)],
        );
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.primal[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_objective_feasible_vertex() {
        let m = lp(
            Sense::Min,
            vec![
                Variable::continuous("x", 0.0, 5.0, 0.0),
                Variable::continuous("y", 0.0, 5.0, 0.0),
            ],
            vec![Constraint::new(
                "c",
                vec![(0, 1.0), (1, 1.0)],
                ConSense::Eq,
                3.0,
            )],
        );
        let s = solve_lp(&m).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.objective, 0.0);
        assert!((s.primal[0] + s.primal[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn textbook_max_problem() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let m = lp(
            Sense::Max,
            vec![
                Variable::continuous("x", 0.0, f64::INFINITY, 3.0),
                Variable::continuous("y", 0.0, f64::INFINITY, 5.0),
            ],
            vec![
                Constraint::new("a", vec![(0, 1.0)], ConSense::Le, 4.0),
                Constraint::new("b", vec![(1, 2.0)], ConSense::Le, 12.0),
                Constraint::new("c", vec![(0, 3.0), (1, 2.0)], ConSense::Le, 18.0),
            ],
        );
        let s = solve_lp(&m).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-9);
        assert!((s.primal[0] - 2.0).abs() < 1e-9 && (s.primal[1] - 6.0).abs() < 1e-9);
        // duals of the max problem are nonnegative on <= rows
        assert!((s.duals[1] - 1.5).abs() < 1e-9);
        assert!((s.duals[2] - 1.0).abs() < 1e-9);
        assert!(s.duals[0].abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let inf = lp(
            Sense::Min,
            vec![Variable::continuous("x", 0.0, f64::INFINITY, 1.0)],
            vec![
                Constraint::new("a", vec![(0, 1.0)], ConSense::Ge, 2.0),
                Constraint::new("b", vec![(0, 1.0)], ConSense::Le, 1.0),
            ],
        );
        assert_eq!(solve_lp(&inf).unwrap().status, LpStatus::Infeasible);
        let unb = lp(
            Sense::Max,
            vec![Variable::continuous("x", 0.0, f64::INFINITY, 1.0)],
            vec![Constraint::new("a", vec![(0, 1.0)], ConSense::Ge, 2.0)],
        );
        assert_eq!(solve_lp(&unb).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y st x - y = 1, x + y >= 3, x,y free -> any point on x+y=3 line with x-y=1: (2,1)
        let m = lp(
            Sense::Min,
            vec![
                Variable::continuous("x", f64::NEG_INFINITY, f64::INFINITY, 1.0),
                Variable::continuous("y", f64::NEG_INFINITY, f64::INFINITY, 1.0),
            ],
            vec![
                Constraint::new("e", vec![(0, 1.0), (1, -1.0)], ConSense::Eq, 1.0),
                Constraint::new("g", vec![(0, 1.0), (1, 1.0)], ConSense::Ge, 3.0),
            ],
        );
        let s = solve_lp(&m).unwrap();
        assert!((s.objective - 3.0).abs() < 1e-9);
        assert!((s.primal[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn warm_dual_after_bound_change() {
        // min -x - y st x + y <= 3.5, x <= 2.5 ; tighten x <= 1
        let m = lp(
            Sense::Min,
            vec![
                Variable::continuous("x", 0.0, 10.0, -2.0),
                Variable::continuous("y", 0.0, 10.0, -1.0),
            ],
            vec![
                Constraint::new("a", vec![(0, 1.0), (1, 1.0)], ConSense::Le, 3.5),
                Constraint::new("b", vec![(0, 1.0)], ConSense::Le, 2.5),
            ],
        );
        let mut s = Simplex::new(&m);
        assert_eq!(s.solve_cold().unwrap(), LpStatus::Optimal);
        assert!((s.min_objective() + 6.0).abs() < 1e-9);
        let snap = s.snapshot().unwrap();
        s.set_var_bounds(0, 0.0, 1.0);
        assert_eq!(s.solve_warm().unwrap(), LpStatus::Optimal);
        assert!((s.min_objective() + 4.5).abs() < 1e-9);
        s.set_var_bounds(0, 2.0, 10.0);
        assert!(s.restore(&snap));
        assert_eq!(s.solve_warm().unwrap(), LpStatus::Optimal);
        assert!((s.min_objective() + 6.0).abs() < 1e-9);
        s.set_var_bounds(0, 4.0, 10.0);
        assert_eq!(s.solve_warm().unwrap(), LpStatus::Infeasible);
    }
}
