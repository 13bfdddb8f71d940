//! Bounded-variable revised simplex with a dense basis inverse, built for
//! re-solving the same rows under changing variable bounds.
//!
//! Every structural variable is boxed, and each row gets one slack whose
//! bounds encode the row sense. With all slacks basic and each structural
//! variable at the bound favoured by its cost, the basis is dual feasible,
//! so a dual simplex reaches the optimum without artificial variables.
//! Bound changes and appended rows keep the current basis dual feasible,
//! which lets branch and bound re-optimise from the previous basis. A primal
//! pass with Dantzig pricing, a Bland fallback on degenerate runs and a
//! two-pass Harris ratio test polishes the result.

use std::time::Instant;

use crate::model::{LinearConstraint, Relation};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-7;
const DEGENERATE_RUN: usize = 50;
const REFACTOR_EVERY: usize = 100;
const PERTURBATION: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64, iterations: usize },
    Infeasible { iterations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpFailure {
    TimedOut,
    Numerical(String),
}

/// A linear program `max c·x` over rows added so far, kept in basis form
/// between solves.
pub(crate) struct WarmLp {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    rhs: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    /// Basis position of each variable, if basic.
    position: Vec<Option<usize>>,
    /// Row-major inverse of the basis matrix; row `p` belongs to basis
    /// position `p`.
    binv: Vec<f64>,
    iterations: usize,
    since_refactor: usize,
    max_iter: usize,
}

impl WarmLp {
    /// An LP over `num_vars` variables in `[0, 1]` with no rows.
    pub(crate) fn new(obj: &[f64]) -> Self {
        let n = obj.len();
        let x = obj.iter().map(|&c| if c > 0.0 { 1.0 } else { 0.0 }).collect();
        WarmLp {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            lb: vec![0.0; n],
            ub: vec![1.0; n],
            cost: obj.to_vec(),
            rhs: Vec::new(),
            x,
            basis: Vec::new(),
            position: vec![None; n],
            binv: Vec::new(),
            iterations: 0,
            since_refactor: 0,
            max_iter: 0,
        }
    }

    fn total(&self) -> usize {
        self.cols.len()
    }

    /// Appends rows, each with a new basic slack. The basis stays dual
    /// feasible.
    pub(crate) fn add_rows(&mut self, rows: &[&LinearConstraint]) {
        for r in rows {
            let i = self.m;
            let mut coef_on_basic = Vec::new();
            for &(v, a) in &r.terms {
                self.cols[v.0].push((i, a));
                if let Some(p) = self.position[v.0] {
                    coef_on_basic.push((p, a));
                }
            }
            let (lo, hi) = match r.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            let slack = self.total();
            self.cols.push(vec![(i, 1.0)]);
            self.lb.push(lo);
            self.ub.push(hi);
            self.cost.push(0.0);
            self.x.push(0.0);
            self.rhs.push(r.rhs);
            self.position.push(Some(i));
            self.basis.push(slack);

            let (m, m1) = (self.m, self.m + 1);
            let mut binv = vec![0.0; m1 * m1];
            for p in 0..m {
                binv[p * m1..p * m1 + m].copy_from_slice(&self.binv[p * m..(p + 1) * m]);
            }
            for &(p, a) in &coef_on_basic {
                for k in 0..m {
                    binv[m * m1 + k] -= a * self.binv[p * m + k];
                }
            }
            binv[m * m1 + m] = 1.0;
            self.binv = binv;
            self.m = m1;
        }
        self.recompute_basics();
    }

    /// The current basic variables, for [`WarmLp::restore`].
    pub(crate) fn snapshot(&self) -> Vec<usize> {
        self.basis.clone()
    }

    /// Reinstates a basis taken by [`WarmLp::snapshot`]. Rows added since
    /// then enter with their slacks basic. Falls back to the all-slack basis
    /// if the saved one has become singular.
    pub(crate) fn restore(&mut self, saved: &[usize]) {
        let old_rows = saved.len();
        let n = self.n;
        self.basis = saved.to_vec();
        self.basis.extend((old_rows..self.m).map(|i| n + i));
        self.position = vec![None; self.total()];
        for (p, &j) in self.basis.iter().enumerate() {
            self.position[j] = Some(p);
        }
        self.since_refactor = 1;
    }

    /// Returns to the all-slack basis with every structural variable at the
    /// bound its cost prefers.
    fn reset(&mut self) {
        let m = self.m;
        for p in 0..self.n {
            self.position[p] = None;
        }
        for i in 0..m {
            self.basis[i] = self.n + i;
            self.position[self.n + i] = Some(i);
        }
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = 1.0;
        }
        for j in 0..self.n {
            self.x[j] = if self.cost[j] > 0.0 { self.ub[j] } else { self.lb[j] };
        }
        self.since_refactor = 0;
        self.recompute_basics();
    }

    /// Solves under the given structural bounds, which must be finite.
    pub(crate) fn solve(&mut self, lb: &[f64], ub: &[f64], deadline: Option<Instant>) -> Result<LpOutcome, LpFailure> {
        self.lb[..self.n].copy_from_slice(lb);
        self.ub[..self.n].copy_from_slice(ub);
        self.iterations = 0;
        self.max_iter = 10_000 + 20 * (self.total() + self.m);
        match self.attempt(deadline) {
            Err(LpFailure::Numerical(_)) => {
                self.reset();
                self.attempt(deadline)
            }
            other => other,
        }
    }

    fn attempt(&mut self, deadline: Option<Instant>) -> Result<LpOutcome, LpFailure> {
        if self.since_refactor > 0 {
            self.refactor()?;
        }
        if !self.place_nonbasics() {
            self.reset();
        }
        if !self.dual_optimise(deadline)? {
            return Ok(LpOutcome::Infeasible { iterations: self.iterations });
        }
        self.primal_optimise(deadline)?;
        self.recompute_basics();
        let x: Vec<f64> = self.x[..self.n].to_vec();
        let value = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal { x, value, iterations: self.iterations })
    }

    /// Moves each nonbasic variable to the bound matching its reduced cost.
    /// Returns false if some nonbasic slack cannot be made dual feasible.
    fn place_nonbasics(&mut self) -> bool {
        let y = self.duals();
        for j in 0..self.total() {
            if self.position[j].is_some() {
                continue;
            }
            let d = self.reduced_cost(j, &y);
            let (lo, hi) = (self.lb[j], self.ub[j]);
            let want = if lo == hi {
                lo
            } else if d > OPT_TOL {
                hi
            } else if d < -OPT_TOL || (lo.is_finite() && (hi.is_infinite() || self.x[j] - lo <= hi - self.x[j])) {
                lo
            } else {
                hi
            };
            if !want.is_finite() {
                return false;
            }
            self.x[j] = want;
        }
        self.recompute_basics();
        true
    }

    fn refactor(&mut self) -> Result<(), LpFailure> {
        let m = self.m;
        // Gauss-Jordan on [B | I].
        let mut a = vec![0.0; m * m];
        for (p, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + p] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let pivot = (c..m).max_by(|&r, &s| a[r * m + c].abs().total_cmp(&a[s * m + c].abs())).unwrap();
            if a[pivot * m + c].abs() < 1e-11 {
                return Err(LpFailure::Numerical("singular basis".into()));
            }
            if pivot != c {
                for k in 0..m {
                    a.swap(pivot * m + k, c * m + k);
                    inv.swap(pivot * m + k, c * m + k);
                }
            }
            let d = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r * m + c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r * m + k] -= f * a[c * m + k];
                            inv[r * m + k] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        // Rows of `inv` correspond to columns of B, i.e. basis positions.
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut r = self.rhs.clone();
        for j in 0..self.total() {
            if self.position[j].is_none() && self.x[j] != 0.0 {
                for &(i, v) in &self.cols[j] {
                    r[i] -= v * self.x[j];
                }
            }
        }
        for p in 0..m {
            let row = &self.binv[p * m..(p + 1) * m];
            self.x[self.basis[p]] = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for p in 0..m {
            let c = self.cost[self.basis[p]];
            if c != 0.0 {
                let row = &self.binv[p * m..(p + 1) * m];
                for (yk, a) in y.iter_mut().zip(row) {
                    *yk += c * a;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, j: usize, y: &[f64]) -> f64 {
        self.cost[j] - self.cols[j].iter().map(|&(i, v)| y[i] * v).sum::<f64>()
    }

    fn direction(&self, q: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(k, v) in &self.cols[q] {
            for (p, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[p * m + k] * v;
            }
        }
        alpha
    }

    fn at_upper(&self, j: usize) -> bool {
        self.ub[j].is_finite() && (self.x[j] - self.ub[j]).abs() <= FEAS_TOL
    }

    fn at_lower(&self, j: usize) -> bool {
        self.lb[j].is_finite() && (self.x[j] - self.lb[j]).abs() <= FEAS_TOL
    }

    fn tick(&mut self, deadline: Option<Instant>) -> Result<(), LpFailure> {
        self.iterations += 1;
        if self.iterations > self.max_iter {
            return Err(LpFailure::Numerical("iteration limit".into()));
        }
        if self.iterations.is_multiple_of(64) && deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(LpFailure::TimedOut);
        }
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Replaces the basic variable at position `r` by `q`, whose column in
    /// the current basis is `alpha`.
    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        let m = self.m;
        let out = self.basis[r];
        let pr = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= pr;
        }
        let pivot_row: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for p in 0..m {
            if p != r && alpha[p] != 0.0 {
                let f = alpha[p];
                let row = &mut self.binv[p * m..(p + 1) * m];
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
            }
        }
        self.position[out] = None;
        self.position[q] = Some(r);
        self.basis[r] = q;
        self.since_refactor += 1;
    }

    /// Dual simplex from a dual feasible basis. Returns false when the rows
    /// are infeasible under the current bounds.
    ///
    /// Costs of nonbasic variables are nudged away from zero in the
    /// dual-feasible direction for the duration of the call to break dual
    /// degeneracy, and the ratio test flips boxed variables to their other
    /// bound while that still leaves the leaving row violated.
    fn dual_optimise(&mut self, deadline: Option<Instant>) -> Result<bool, LpFailure> {
        let original = self.cost.clone();
        for j in 0..self.total() {
            if self.position[j].is_none() && self.lb[j] < self.ub[j] {
                let spread = 1.0 + ((j.wrapping_mul(2654435761) % 1000) as f64) / 1000.0;
                let xi = PERTURBATION * spread * (1.0 + self.cost[j].abs());
                self.cost[j] += if self.at_upper(j) { xi } else { -xi };
            }
        }
        let result = self.dual_loop(deadline);
        self.cost = original;
        result
    }

    fn dual_loop(&mut self, deadline: Option<Instant>) -> Result<bool, LpFailure> {
        let m = self.m;
        let mut degenerate = 0usize;
        loop {
            // Leaving row: largest bound violation, or the smallest variable
            // index after a run of degenerate pivots.
            let bland = degenerate >= DEGENERATE_RUN;
            let mut leave: Option<(usize, f64)> = None;
            for p in 0..m {
                let b = self.basis[p];
                let v = (self.lb[b] - self.x[b]).max(self.x[b] - self.ub[b]);
                if v <= FEAS_TOL {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        if bland {
                            b < self.basis[l]
                        } else {
                            v > best
                        }
                    }
                };
                if better {
                    leave = Some((p, v));
                }
            }
            let Some((r, violation)) = leave else {
                return Ok(true);
            };
            self.tick(deadline)?;
            let b = self.basis[r];
            let (target, up) = if self.x[b] < self.lb[b] { (self.lb[b], 1.0) } else { (self.ub[b], -1.0) };
            let rho = &self.binv[r * m..(r + 1) * m];
            let y = self.duals();
            // Candidates (variable, ratio, |alpha|) able to push x_b toward
            // its violated bound.
            let mut cands = Vec::new();
            for j in 0..self.total() {
                if self.position[j].is_some() || self.lb[j] == self.ub[j] {
                    continue;
                }
                let a: f64 = self.cols[j].iter().map(|&(i, v)| rho[i] * v).sum();
                if a.abs() < PIVOT_TOL {
                    continue;
                }
                let eligible = (self.at_lower(j) && a * up < 0.0) || (self.at_upper(j) && a * up > 0.0);
                if eligible {
                    let d = self.reduced_cost(j, &y).abs();
                    cands.push((j, d / a.abs(), a.abs()));
                }
            }
            cands.sort_by(|x, y| {
                x.1.total_cmp(&y.1).then(if bland { x.0.cmp(&y.0) } else { y.2.total_cmp(&x.2) })
            });
            let mut slope = violation;
            let mut flipped = Vec::new();
            let mut entering = None;
            for &(j, ratio, a) in &cands {
                let range = self.ub[j] - self.lb[j];
                if range.is_finite() && slope - a * range > FEAS_TOL {
                    slope -= a * range;
                    flipped.push(j);
                } else {
                    entering = Some((j, ratio));
                    break;
                }
            }
            let Some((q, ratio)) = entering else {
                return Ok(false);
            };
            degenerate = if ratio <= 1e-12 { degenerate + 1 } else { 0 };
            if !flipped.is_empty() {
                let mut shift = vec![0.0; m];
                for &j in &flipped {
                    let to = if self.at_lower(j) { self.ub[j] } else { self.lb[j] };
                    let delta = to - self.x[j];
                    self.x[j] = to;
                    for &(i, v) in &self.cols[j] {
                        shift[i] += v * delta;
                    }
                }
                for p in 0..m {
                    let row = &self.binv[p * m..(p + 1) * m];
                    let change: f64 = row.iter().zip(&shift).map(|(a, s)| a * s).sum();
                    self.x[self.basis[p]] -= change;
                }
            }
            let alpha = self.direction(q);
            let pr = alpha[r];
            if pr.abs() < PIVOT_TOL {
                return Err(LpFailure::Numerical("unstable dual pivot".into()));
            }
            let step = (self.x[b] - target) / pr;
            for p in 0..m {
                if alpha[p] != 0.0 {
                    self.x[self.basis[p]] -= step * alpha[p];
                }
            }
            self.x[q] += step;
            self.x[b] = target;
            self.pivot(r, q, &alpha);
        }
    }

    /// Maximises `cost · x` from the current basic feasible solution.
    fn primal_optimise(&mut self, deadline: Option<Instant>) -> Result<(), LpFailure> {
        let m = self.m;
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let y = self.duals();

            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.total() {
                if self.position[j].is_some() || self.lb[j] == self.ub[j] {
                    continue;
                }
                let d = self.reduced_cost(j, &y);
                let dir = if d > OPT_TOL && !self.at_upper(j) {
                    1.0
                } else if d < -OPT_TOL && !self.at_lower(j) {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                if entering.is_none_or(|(_, best, _)| d.abs() > best.abs()) {
                    entering = Some((j, d, dir));
                }
            }
            let Some((q, _, dir)) = entering else {
                return Ok(());
            };
            self.tick(deadline)?;
            let alpha = self.direction(q);

            // Basic p moves at rate -dir * alpha[p] per unit step.
            let limit = |p: usize, relax: f64| -> Option<f64> {
                let rate = -dir * alpha[p];
                let b = self.basis[p];
                if rate < -PIVOT_TOL && self.lb[b].is_finite() {
                    Some(((self.x[b] - self.lb[b] + relax) / -rate).max(0.0))
                } else if rate > PIVOT_TOL && self.ub[b].is_finite() {
                    Some(((self.ub[b] - self.x[b] + relax) / rate).max(0.0))
                } else {
                    None
                }
            };
            let span = self.ub[q] - self.lb[q];
            let mut leave: Option<usize> = None;
            let mut theta;
            if bland {
                theta = f64::INFINITY;
                for p in 0..m {
                    if let Some(t) = limit(p, 0.0) {
                        let better = t < theta - 1e-12
                            || (t <= theta + 1e-12 && leave.is_some_and(|l| self.basis[p] < self.basis[l]));
                        if better {
                            theta = t;
                            leave = Some(p);
                        }
                    }
                }
            } else {
                let bound = (0..m).filter_map(|p| limit(p, FEAS_TOL)).fold(f64::INFINITY, f64::min);
                let mut best_alpha = 0.0;
                theta = f64::INFINITY;
                for p in 0..m {
                    if let Some(t) = limit(p, 0.0) {
                        if t <= bound && alpha[p].abs() > best_alpha {
                            best_alpha = alpha[p].abs();
                            theta = t;
                            leave = Some(p);
                        }
                    }
                }
            }
            if span <= theta {
                // Bound flip: the entering variable crosses its whole range.
                theta = span;
                leave = None;
            }
            if !theta.is_finite() {
                return Err(LpFailure::Numerical("unbounded relaxation".into()));
            }
            degenerate = if theta <= 1e-12 { degenerate + 1 } else { 0 };

            for p in 0..m {
                if alpha[p] != 0.0 {
                    self.x[self.basis[p]] -= dir * theta * alpha[p];
                }
            }
            self.x[q] += dir * theta;

            match leave {
                None => self.x[q] = if dir > 0.0 { self.ub[q] } else { self.lb[q] },
                Some(r) => {
                    let out = self.basis[r];
                    let rate = -dir * alpha[r];
                    self.x[out] = if rate < 0.0 { self.lb[out] } else { self.ub[out] };
                    self.pivot(r, q, &alpha);
                }
            }
        }
    }
}

/// Maximises `obj · x` subject to `rows` and finite bounds `lb <= x <= ub`.
#[cfg(test)]
pub(crate) fn solve_lp(
    rows: &[&LinearConstraint],
    obj: &[f64],
    lb: &[f64],
    ub: &[f64],
) -> Result<LpOutcome, LpFailure> {
    let mut lp = WarmLp::new(obj);
    lp.add_rows(rows);
    lp.solve(lb, ub, None)
}
