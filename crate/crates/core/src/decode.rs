//! Turning solver assignments back into exchanges.

use std::collections::BTreeSet;

use crate::error::DecodeError;
use crate::graph::{CompatibilityGraph, CountryId, NodeId};
use crate::model::{IpModel, VarKind};
use crate::solver::Assignment;

/// Selected exchanges. Cycles start at their smallest node id; chains start
/// at their altruistic donor and list the recipients in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExchangePlan {
    pub cycles: Vec<Vec<NodeId>>,
    pub chains: Vec<Vec<NodeId>>,
    /// Transplants per country, attributed to the recipient's country.
    pub transplants: Vec<usize>,
    pub weight: f64,
}

impl ExchangePlan {
    pub fn total_transplants(&self) -> usize {
        self.transplants.iter().sum()
    }

    pub fn transplants_in(&self, country: CountryId) -> usize {
        self.transplants[country.index()]
    }

    /// Every node that donates or receives.
    pub fn matched_nodes(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.cycles.iter().chain(&self.chains).flatten().copied().collect();
        v.sort();
        v
    }

    /// Arcs of all exchanges, in cycle and chain order.
    pub fn arcs(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for c in &self.cycles {
            for i in 0..c.len() {
                out.push((c[i], c[(i + 1) % c.len()]));
            }
        }
        for ch in &self.chains {
            out.extend(ch.windows(2).map(|w| (w[0], w[1])));
        }
        out
    }

    /// Number of times an international cycle changes country along its
    /// arcs, per cycle.
    pub fn country_switches(&self, g: &CompatibilityGraph) -> Vec<usize> {
        self.cycles
            .iter()
            .map(|c| (0..c.len()).filter(|&i| g.country_of(c[i]) != g.country_of(c[(i + 1) % c.len()])).count())
            .collect()
    }

    /// Re-expresses the plan in the ids of a parent graph.
    pub fn map_nodes(&self, f: impl Fn(NodeId) -> NodeId) -> ExchangePlan {
        let mut cycles: Vec<Vec<NodeId>> = self.cycles.iter().map(|c| canonical(c.iter().map(|&v| f(v)).collect())).collect();
        cycles.sort();
        let mut chains: Vec<Vec<NodeId>> = self.chains.iter().map(|c| c.iter().map(|&v| f(v)).collect()).collect();
        chains.sort();
        ExchangePlan { cycles, chains, transplants: self.transplants.clone(), weight: self.weight }
    }

    /// Combines plans over disjoint node sets of the same graph.
    pub fn merge(&mut self, other: ExchangePlan) {
        self.cycles.extend(other.cycles);
        self.cycles.sort();
        self.chains.extend(other.chains);
        self.chains.sort();
        if self.transplants.len() < other.transplants.len() {
            self.transplants.resize(other.transplants.len(), 0);
        }
        for (a, b) in self.transplants.iter_mut().zip(&other.transplants) {
            *a += b;
        }
        self.weight += other.weight;
    }
}

fn canonical(mut c: Vec<NodeId>) -> Vec<NodeId> {
    if let Some(min) = c.iter().enumerate().min_by_key(|(_, v)| **v).map(|(i, _)| i) {
        c.rotate_left(min);
    }
    c
}

/// Builds an exchange plan from an assignment of `model`, which must have
/// been built on `g`.
///
/// Arcs of selected cycle variables, arc variables and segment variables are
/// pooled and decomposed by following successors; each node may have at
/// most one selected in-arc and out-arc, and every walk must close. Cycles
/// through chain-reduction nodes are cut into chains at each altruist.
pub fn decode(g: &CompatibilityGraph, model: &IpModel, assignment: &Assignment) -> Result<ExchangePlan, DecodeError> {
    if assignment.values.len() != model.num_vars() {
        return Err(DecodeError::Length { expected: model.num_vars(), got: assignment.values.len() });
    }
    let n = g.num_nodes();
    let mut arcs: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for (kind, _) in model.variables.iter().zip(&assignment.values).filter(|(_, on)| **on) {
        match *kind {
            VarKind::Cycle(c) => arcs.extend(model.cycles[c].arcs()),
            VarKind::Segment(s) => arcs.extend(model.segments[s].arcs()),
            _ => {
                if let Some(a) = kind.arc() {
                    arcs.insert(a);
                }
            }
        }
    }
    let mut succ: Vec<Option<NodeId>> = vec![None; n];
    let mut has_pred = vec![false; n];
    for &(u, v) in &arcs {
        if u.0 >= n || v.0 >= n || !g.has_arc(u, v) {
            return Err(DecodeError::NotDecomposable(format!("arc {u} -> {v} is not in the graph")));
        }
        if succ[u.0].replace(v).is_some() {
            return Err(DecodeError::NotDecomposable(format!("node {u} donates twice")));
        }
        if std::mem::replace(&mut has_pred[v.0], true) {
            return Err(DecodeError::NotDecomposable(format!("node {v} receives twice")));
        }
    }

    let mut plan = ExchangePlan { transplants: vec![0; g.num_countries()], ..Default::default() };
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] || succ[start].is_none() {
            continue;
        }
        let mut walk = vec![NodeId(start)];
        seen[start] = true;
        let mut cur = NodeId(start);
        loop {
            let Some(next) = succ[cur.0] else {
                return Err(DecodeError::NotDecomposable(format!("walk from {start} stops at {cur}")));
            };
            if next.0 == start {
                break;
            }
            if seen[next.0] {
                return Err(DecodeError::NotDecomposable(format!("walk from {start} re-enters {next}")));
            }
            seen[next.0] = true;
            walk.push(next);
            cur = next;
        }
        let weight: f64 = (0..walk.len()).map(|i| g.arc_weight(walk[i], walk[(i + 1) % walk.len()]).unwrap()).sum();
        plan.weight += weight;
        let altruists: Vec<usize> = (0..walk.len()).filter(|&i| g.node(walk[i]).kind.is_altruist()).collect();
        if altruists.is_empty() {
            for v in &walk {
                plan.transplants[g.country_of(*v).index()] += 1;
            }
            plan.cycles.push(walk);
        } else {
            walk.rotate_left(altruists[0]);
            let mut chain: Vec<NodeId> = Vec::new();
            for v in walk {
                if g.node(v).kind.is_altruist() {
                    if !chain.is_empty() {
                        plan.chains.push(std::mem::take(&mut chain));
                    }
                } else {
                    plan.transplants[g.country_of(v).index()] += 1;
                }
                chain.push(v);
            }
            plan.chains.push(chain);
        }
    }
    plan.cycles.sort();
    plan.chains.sort();
    Ok(plan)
}
