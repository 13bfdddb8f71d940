//! Exact solution of binary programs.
//!
//! [`solve`] runs best-first branch and bound over LP relaxations; rows whose
//! tag is lazy enter the relaxation only once violated. [`solve_exhaustive`]
//! enumerates every assignment of a small model and serves as a reference.

mod external;
mod simplex;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

pub use external::solve_external;

use crate::error::SolverError;
use crate::model::{IpModel, LinearConstraint};
use simplex::{LpFailure, LpOutcome, WarmLp};

const INT_TOL: f64 = 1e-6;
const PRUNE_TOL: f64 = 1e-7;
/// Lazy rows added per relaxation round.
const LAZY_BATCH: usize = 500;
pub const EXHAUSTIVE_MAX_VARS: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub values: Vec<bool>,
    pub objective: f64,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![false; n], objective: 0.0 }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: usize,
    pub branches: usize,
    pub root_bound: f64,
    pub lp_iterations: usize,
    pub lazy_rows_added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub assignment: Assignment,
    pub stats: SolveStats,
}

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    pub time_limit: Option<Duration>,
}

struct Node {
    bound: f64,
    seq: usize,
    fixings: Vec<(usize, bool)>,
    /// Optimal basis of the parent relaxation.
    warm: Option<Rc<Vec<usize>>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    /// Highest bound first; among equal bounds the earliest created.
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: &'a IpModel,
    lp: WarmLp,
    lazy: Vec<&'a LinearConstraint>,
    active_lazy: Vec<bool>,
    integral_objective: bool,
    deadline: Option<Instant>,
    stats: SolveStats,
    incumbent: Option<Assignment>,
}

enum Relaxation {
    Infeasible,
    Optimal { x: Vec<f64>, value: f64 },
}

impl<'a> Search<'a> {
    fn timed_out(&self) -> SolverError {
        let incumbent = self.incumbent.clone().unwrap_or_else(|| Assignment::zeros(self.model.num_vars()));
        SolverError::TimedOut { incumbent: Box::new(incumbent) }
    }

    fn relax(&mut self, fixings: &[(usize, bool)], warm: Option<&[usize]>) -> Result<Relaxation, SolverError> {
        if let Some(basis) = warm {
            self.lp.restore(basis);
        }
        let n = self.model.num_vars();
        let mut lb = vec![0.0; n];
        let mut ub = vec![1.0; n];
        for &(v, val) in fixings {
            let b = if val { 1.0 } else { 0.0 };
            lb[v] = b;
            ub[v] = b;
        }
        loop {
            let out = self.lp.solve(&lb, &ub, self.deadline).map_err(|e| match e {
                LpFailure::TimedOut => self.timed_out(),
                LpFailure::Numerical(msg) => SolverError::Numerical(msg),
            })?;
            let (x, value) = match out {
                LpOutcome::Infeasible { iterations } => {
                    self.stats.lp_iterations += iterations;
                    return Ok(Relaxation::Infeasible);
                }
                LpOutcome::Optimal { x, value, iterations } => {
                    self.stats.lp_iterations += iterations;
                    (x, value)
                }
            };
            let mut violated: Vec<(f64, usize)> = self
                .lazy
                .iter()
                .enumerate()
                .filter(|(i, _)| !self.active_lazy[*i])
                .filter_map(|(i, r)| {
                    let lhs: f64 = r.terms.iter().map(|(v, a)| a * x[v.0]).sum();
                    let excess = match r.relation {
                        crate::model::Relation::Le => lhs - r.rhs,
                        crate::model::Relation::Ge => r.rhs - lhs,
                        crate::model::Relation::Eq => (lhs - r.rhs).abs(),
                    };
                    (excess > INT_TOL).then_some((excess, i))
                })
                .collect();
            if violated.is_empty() {
                return Ok(Relaxation::Optimal { x, value });
            }
            violated.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut added = Vec::new();
            for &(_, i) in violated.iter().take(LAZY_BATCH) {
                self.active_lazy[i] = true;
                added.push(self.lazy[i]);
            }
            self.stats.lazy_rows_added += added.len();
            self.lp.add_rows(&added);
        }
    }

    fn effective(&self, bound: f64) -> f64 {
        if self.integral_objective {
            (bound + INT_TOL).floor()
        } else {
            bound
        }
    }

    fn prunable(&self, bound: f64) -> bool {
        self.incumbent.as_ref().is_some_and(|inc| self.effective(bound) < inc.objective + PRUNE_TOL)
    }

    fn offer(&mut self, values: Vec<bool>) {
        if !self.model.is_feasible(&values) {
            return;
        }
        let objective = self.model.objective_value(&values);
        if self.incumbent.as_ref().is_none_or(|inc| objective > inc.objective + PRUNE_TOL) {
            self.incumbent = Some(Assignment { values, objective });
        }
    }
}

/// Maximises the model by LP-based branch and bound.
///
/// Returns [`SolverError::TimedOut`] carrying the best assignment found when
/// the time limit expires, and [`SolverError::Infeasible`] when no binary
/// assignment satisfies the rows.
pub fn solve(model: &IpModel, options: &SolverOptions) -> Result<Solution, SolverError> {
    let n = model.num_vars();
    let (lazy, base): (Vec<&LinearConstraint>, Vec<&LinearConstraint>) =
        model.constraints.iter().partition(|c| c.tag.is_lazy());
    let mut obj = vec![0.0; n];
    for &(v, c) in &model.objective {
        obj[v.0] += c;
    }
    let mut lp = WarmLp::new(&obj);
    lp.add_rows(&base);
    let mut s = Search {
        model,
        lp,
        active_lazy: vec![false; lazy.len()],
        lazy,
        integral_objective: obj.iter().all(|c| c.fract() == 0.0),
        deadline: options.time_limit.map(|d| Instant::now() + d),
        stats: SolveStats::default(),
        incumbent: None,
    };
    s.offer(vec![false; n]);

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node { bound: f64::INFINITY, seq, fixings: Vec::new(), warm: None });
    let mut root = true;
    while let Some(node) = heap.pop() {
        if s.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(s.timed_out());
        }
        if s.prunable(node.bound) {
            continue;
        }
        s.stats.nodes += 1;
        let (x, value) = match s.relax(&node.fixings, node.warm.as_deref().map(|b| b.as_slice()))? {
            Relaxation::Infeasible => {
                if root {
                    s.stats.root_bound = f64::NEG_INFINITY;
                    root = false;
                }
                continue;
            }
            Relaxation::Optimal { x, value } => (x, value),
        };
        if root {
            s.stats.root_bound = value;
            root = false;
        }
        if s.prunable(value) {
            continue;
        }
        let fractional = x
            .iter()
            .enumerate()
            .filter(|(_, v)| (*v - v.round()).abs() > INT_TOL)
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i);
        match fractional {
            None => s.offer(x.iter().map(|v| *v > 0.5).collect()),
            Some(j) => {
                s.offer(x.iter().map(|v| *v > 0.5).collect());
                s.offer(x.iter().map(|v| *v > 1.0 - INT_TOL).collect());
                s.stats.branches += 1;
                let warm = Rc::new(s.lp.snapshot());
                for val in [true, false] {
                    seq += 1;
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, val));
                    heap.push(Node { bound: value, seq, fixings, warm: Some(warm.clone()) });
                }
            }
        }
    }
    match s.incumbent {
        Some(assignment) => Ok(Solution { assignment, stats: s.stats }),
        None => Err(SolverError::Infeasible),
    }
}

/// Reference solver: scans all `2^n` assignments in lexicographic order
/// (first variable most significant) and keeps the first strictly better
/// feasible one.
pub fn solve_exhaustive(model: &IpModel) -> Result<Assignment, SolverError> {
    let n = model.num_vars();
    if n > EXHAUSTIVE_MAX_VARS {
        return Err(SolverError::TooManyVariables { got: n, max: EXHAUSTIVE_MAX_VARS });
    }
    let mut best: Option<Assignment> = None;
    let mut values = vec![false; n];
    for mask in 0u64..(1u64 << n) {
        for (i, v) in values.iter_mut().enumerate() {
            *v = (mask >> (n - 1 - i)) & 1 == 1;
        }
        if !model.is_feasible(&values) {
            continue;
        }
        let objective = model.objective_value(&values);
        if best.as_ref().is_none_or(|b| objective > b.objective + 1e-9) {
            best = Some(Assignment { values: values.clone(), objective });
        }
    }
    best.ok_or(SolverError::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::Cycle;
    use crate::graph::{CountryId, NodeId};
    use crate::model::{build_cycle_model, ConstraintTag, Relation, VarId, VarKind};

    fn cycle(nodes: &[usize]) -> Cycle {
        Cycle {
            nodes: nodes.iter().map(|&n| NodeId(n)).collect(),
            countries: vec![CountryId(1); nodes.len()],
            weight: nodes.len() as f64,
        }
    }

    #[test]
    fn overlapping_cycles_pick_one() {
        let m = build_cycle_model(&[cycle(&[0, 1]), cycle(&[1, 2])], 3).unwrap();
        let sol = solve(&m, &SolverOptions::default()).unwrap();
        assert_eq!(sol.assignment.objective, 2.0);
        assert_eq!(sol.assignment.values.iter().filter(|v| **v).count(), 1);
        let ex = solve_exhaustive(&m).unwrap();
        // Lexicographic scan meets (0, 1) before (1, 0).
        assert_eq!(ex.values, vec![false, true]);
    }

    #[test]
    fn odd_conflict_cycle_needs_branching() {
        let cycles = [cycle(&[0, 1]), cycle(&[1, 2]), cycle(&[2, 0])];
        let m = build_cycle_model(&cycles, 3).unwrap();
        let sol = solve(&m, &SolverOptions::default()).unwrap();
        assert_eq!(sol.assignment.objective, 2.0);
    }

    #[test]
    fn infeasible_model() {
        let mut m = IpModel::default();
        m.variables.push(VarKind::InIndicator(NodeId(0)));
        m.constraints.push(LinearConstraint {
            terms: vec![(VarId(0), 1.0)],
            relation: Relation::Ge,
            rhs: 2.0,
            tag: ConstraintTag::CoverLink,
        });
        assert_eq!(solve(&m, &SolverOptions::default()), Err(SolverError::Infeasible));
        assert_eq!(solve_exhaustive(&m), Err(SolverError::Infeasible));
    }

    #[test]
    fn exhaustive_refuses_large_models() {
        let cycles: Vec<Cycle> = (0..26).map(|i| cycle(&[2 * i, 2 * i + 1])).collect();
        let m = build_cycle_model(&cycles, 52).unwrap();
        assert!(matches!(solve_exhaustive(&m), Err(SolverError::TooManyVariables { got: 26, .. })));
    }

    #[test]
    fn zero_time_limit_times_out() {
        let m = build_cycle_model(&[cycle(&[0, 1])], 2).unwrap();
        let opts = SolverOptions { time_limit: Some(Duration::ZERO) };
        match solve(&m, &opts) {
            Err(SolverError::TimedOut { incumbent }) => assert_eq!(incumbent.objective, 0.0),
            other => panic!("{other:?}"),
        }
    }
}
