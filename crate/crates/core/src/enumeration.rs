//! Policy-aware enumeration of exchange cycles and segments.
//!
//! Cycles are found by a depth-bounded search rooted at each node `r` that
//! only visits nodes with larger ids, so every cycle is produced exactly once
//! with its minimum id first. Roots are independent and are searched in
//! parallel; results are concatenated in root order.

use rayon::prelude::*;

use crate::error::ModelError;
use crate::graph::{CompatibilityGraph, CountryId, NodeId};
use crate::policy::{Cap, PolicyConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    /// Rotation with the minimum node id first.
    pub nodes: Vec<NodeId>,
    pub countries: Vec<CountryId>,
    /// Sum of arc weights.
    pub weight: f64,
}

impl Cycle {
    /// Builds a cycle from an ordered node list, checking every arc
    /// (including the closing one) and canonicalising the rotation.
    pub fn from_nodes(g: &CompatibilityGraph, nodes: &[NodeId]) -> Option<Cycle> {
        if nodes.len() < 2 || nodes.iter().any(|n| n.0 >= g.num_nodes()) {
            return None;
        }
        let mut seen = vec![false; g.num_nodes()];
        for n in nodes {
            if std::mem::replace(&mut seen[n.0], true) {
                return None;
            }
        }
        let start = nodes.iter().enumerate().min_by_key(|(_, n)| **n).map(|(i, _)| i)?;
        let mut rotated = nodes[start..].to_vec();
        rotated.extend_from_slice(&nodes[..start]);
        let mut weight = 0.0;
        for i in 0..rotated.len() {
            weight += g.arc_weight(rotated[i], rotated[(i + 1) % rotated.len()])?;
        }
        let countries = rotated.iter().map(|&n| g.country_of(n)).collect();
        Some(Cycle { nodes: rotated, countries, weight })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_international(&self) -> bool {
        !is_local(self)
    }

    /// Arcs in cycle order, closing arc last.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        let n = self.nodes.len();
        (0..n).map(move |i| (self.nodes[i], self.nodes[(i + 1) % n]))
    }
}

/// A path inside one country; a single node is a segment with no arcs.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub nodes: Vec<NodeId>,
    pub country: CountryId,
    pub weight: f64,
}

impl Segment {
    pub fn arc_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn first(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn last(&self) -> NodeId {
        *self.nodes.last().unwrap()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

pub fn is_local(c: &Cycle) -> bool {
    c.countries.iter().all(|&k| k == c.countries[0])
}

/// Per-country pair counts (`max_pairs`) and the number of distinct
/// countries (`max_countries`).
pub fn check_countries(c: &Cycle, policy: &PolicyConfig) -> bool {
    let mut counts = vec![0usize; policy.num_countries()];
    for k in &c.countries {
        counts[k.index()] += 1;
        if !policy.country(*k).max_pairs.allows(counts[k.index()]) {
            return false;
        }
    }
    let participants = counts.iter().filter(|&&n| n > 0).count();
    policy.max_countries.allows(participants)
}

/// Maximal same-country runs of a cycle, as `(country, node count)`, with a
/// run wrapping over the end of the node list merged into one.
pub fn segment_runs(countries: &[CountryId]) -> Vec<(CountryId, usize)> {
    let n = countries.len();
    if n == 0 {
        return Vec::new();
    }
    let Some(start) = (0..n).find(|&i| countries[i] != countries[(i + n - 1) % n]) else {
        return vec![(countries[0], n)];
    };
    let mut runs: Vec<(CountryId, usize)> = Vec::new();
    for step in 0..n {
        let k = countries[(start + step) % n];
        match runs.last_mut() {
            Some((country, len)) if *country == k => *len += 1,
            _ => runs.push((k, 1)),
        }
    }
    runs
}

/// Segment length (`segment_node_cap`, in nodes) and segments-per-country
/// (`max_segments`) restrictions.
pub fn check_segments(c: &Cycle, policy: &PolicyConfig) -> bool {
    let mut per_country = vec![0usize; policy.num_countries()];
    for (k, nodes) in segment_runs(&c.countries) {
        let rules = policy.country(k);
        // a run of `nodes` nodes has nodes - 1 arcs; the cap is stored in nodes
        if !rules.segment_node_cap.allows(nodes) {
            return false;
        }
        per_country[k.index()] += 1;
        if !rules.max_segments.allows(per_country[k.index()]) {
            return false;
        }
    }
    true
}

/// Local cycles are judged only by their country's national cap; the
/// international checks never rescue an over-long national cycle.
pub fn is_valid_cycle(c: &Cycle, policy: &PolicyConfig) -> bool {
    if is_local(c) {
        policy.country(c.countries[0]).national_cycle_cap.allows(c.len())
    } else {
        policy.international_cycle_cap.allows(c.len()) && check_countries(c, policy) && check_segments(c, policy)
    }
}

fn cycles_from_root(
    g: &CompatibilityGraph,
    root: NodeId,
    max_len: usize,
    accept: &(impl Fn(&Cycle) -> bool + Sync),
) -> Vec<Cycle> {
    fn dfs(
        g: &CompatibilityGraph,
        root: NodeId,
        max_len: usize,
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        weight: f64,
        accept: &(impl Fn(&Cycle) -> bool + Sync),
        out: &mut Vec<Cycle>,
    ) {
        let last = *path.last().unwrap();
        for arc in g.out_arcs(last) {
            let v = arc.target;
            if v == root {
                if path.len() >= 2 {
                    let cycle = Cycle {
                        nodes: path.clone(),
                        countries: path.iter().map(|&n| g.country_of(n)).collect(),
                        weight: weight + arc.weight,
                    };
                    if accept(&cycle) {
                        out.push(cycle);
                    }
                }
            } else if v > root && !on_path[v.0] && path.len() < max_len {
                on_path[v.0] = true;
                path.push(v);
                dfs(g, root, max_len, path, on_path, weight + arc.weight, accept, out);
                path.pop();
                on_path[v.0] = false;
            }
        }
    }

    let mut out = Vec::new();
    let mut on_path = vec![false; g.num_nodes()];
    on_path[root.0] = true;
    let mut path = vec![root];
    dfs(g, root, max_len, &mut path, &mut on_path, 0.0, accept, &mut out);
    out
}

fn search(
    g: &CompatibilityGraph,
    max_len: usize,
    parallel: bool,
    roots: &[NodeId],
    accept: impl Fn(&Cycle) -> bool + Sync,
) -> Vec<Cycle> {
    if parallel {
        roots
            .par_iter()
            .map(|&r| cycles_from_root(g, r, max_len, &accept))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    } else {
        roots.iter().flat_map(|&r| cycles_from_root(g, r, max_len, &accept)).collect()
    }
}

fn bounded_len(policy: &PolicyConfig) -> Result<usize, ModelError> {
    policy.max_cycle_len().ok_or_else(|| {
        ModelError::Unsupported(
            "cycle enumeration needs finite cycle caps; use the mixed or bounded/unbounded \
             formulation when a cap is unbounded"
                .into(),
        )
    })
}

/// Every cycle that satisfies the policy, in canonical form and root order.
pub fn enumerate_cycles(g: &CompatibilityGraph, policy: &PolicyConfig) -> Result<Vec<Cycle>, ModelError> {
    enumerate_cycles_with(g, policy, true)
}

pub fn enumerate_cycles_sequential(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
) -> Result<Vec<Cycle>, ModelError> {
    enumerate_cycles_with(g, policy, false)
}

fn enumerate_cycles_with(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    parallel: bool,
) -> Result<Vec<Cycle>, ModelError> {
    policy.check_countries(g.num_countries())?;
    let max_len = bounded_len(policy)?;
    let roots: Vec<NodeId> = (0..g.num_nodes()).map(NodeId).collect();
    Ok(search(g, max_len, parallel, &roots, |c| is_valid_cycle(c, policy)))
}

/// National cycles of one country, bounded by its national cap.
pub fn enumerate_national_cycles(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    country: CountryId,
) -> Result<Vec<Cycle>, ModelError> {
    policy.check_countries(g.num_countries())?;
    let Cap::Finite(max_len) = policy.country(country).national_cycle_cap else {
        return Err(ModelError::Unsupported(format!(
            "country {country} has unbounded national cycles and cannot be enumerated"
        )));
    };
    let roots: Vec<NodeId> = g.nodes_of(country).collect();
    let sub_ok = |c: &Cycle| c.countries.iter().all(|&k| k == country);
    Ok(search(g, max_len, true, &roots, sub_ok))
}

fn segments_of(g: &CompatibilityGraph, country: CountryId, max_nodes: usize, out: &mut Vec<Segment>) {
    fn extend(
        g: &CompatibilityGraph,
        country: CountryId,
        max_nodes: usize,
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        weight: f64,
        out: &mut Vec<Segment>,
    ) {
        out.push(Segment { nodes: path.clone(), country, weight });
        if path.len() == max_nodes {
            return;
        }
        let last = *path.last().unwrap();
        for arc in g.out_arcs(last) {
            let v = arc.target;
            if g.country_of(v) == country && !on_path[v.0] {
                on_path[v.0] = true;
                path.push(v);
                extend(g, country, max_nodes, path, on_path, weight + arc.weight, out);
                path.pop();
                on_path[v.0] = false;
            }
        }
    }
    let mut on_path = vec![false; g.num_nodes()];
    for start in g.nodes_of(country) {
        on_path[start.0] = true;
        extend(g, country, max_nodes, &mut vec![start], &mut on_path, 0.0, out);
        on_path[start.0] = false;
    }
}

/// Segments of one country: every simple national path (single nodes
/// included) with at most `segment_node_cap` nodes.
pub fn enumerate_segments_of(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    country: CountryId,
) -> Result<Vec<Segment>, ModelError> {
    policy.check_countries(g.num_countries())?;
    let Cap::Finite(max_nodes) = policy.country(country).segment_node_cap else {
        return Err(ModelError::Unsupported(format!(
            "country {country} has unbounded segments and cannot be enumerated"
        )));
    };
    let mut out = Vec::new();
    segments_of(g, country, max_nodes, &mut out);
    Ok(out)
}

/// Segments of every country.
pub fn enumerate_segments(g: &CompatibilityGraph, policy: &PolicyConfig) -> Result<Vec<Segment>, ModelError> {
    let mut out = Vec::new();
    for k in g.countries() {
        out.extend(enumerate_segments_of(g, policy, k)?);
    }
    Ok(out)
}

/// Proper directed paths (no repeated node) with exactly `arcs` arcs, using
/// only arcs accepted by `keep`.
pub fn proper_paths(
    g: &CompatibilityGraph,
    arcs: usize,
    keep: impl Fn(NodeId, NodeId) -> bool,
) -> Vec<Vec<NodeId>> {
    fn extend(
        g: &CompatibilityGraph,
        arcs: usize,
        keep: &impl Fn(NodeId, NodeId) -> bool,
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        out: &mut Vec<Vec<NodeId>>,
    ) {
        if path.len() == arcs + 1 {
            out.push(path.clone());
            return;
        }
        let last = *path.last().unwrap();
        for v in g.successors(last) {
            if !on_path[v.0] && keep(last, v) {
                on_path[v.0] = true;
                path.push(v);
                extend(g, arcs, keep, path, on_path, out);
                path.pop();
                on_path[v.0] = false;
            }
        }
    }
    let mut out = Vec::new();
    if arcs == 0 {
        return out;
    }
    let mut on_path = vec![false; g.num_nodes()];
    for start in 0..g.num_nodes() {
        on_path[start] = true;
        extend(g, arcs, &keep, &mut vec![NodeId(start)], &mut on_path, &mut out);
        on_path[start] = false;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::graph;
    use crate::policy::CountryPolicy;

    fn ids(v: &[usize]) -> Vec<NodeId> {
        v.iter().map(|&i| NodeId(i)).collect()
    }

    fn cycle_of(countries: &[usize]) -> Cycle {
        Cycle {
            nodes: (0..countries.len()).map(NodeId).collect(),
            countries: countries.iter().map(|&k| CountryId(k)).collect(),
            weight: countries.len() as f64,
        }
    }

    fn policy2(k: [Cap; 2], l: [Cap; 2], lambda: [Cap; 2], beta: [Cap; 2], big_k: Cap, gamma: Cap) -> PolicyConfig {
        PolicyConfig {
            countries: (0..2)
                .map(|i| CountryPolicy {
                    national_cycle_cap: k[i],
                    segment_node_cap: l[i],
                    max_segments: lambda[i],
                    max_pairs: beta[i],
                })
                .collect(),
            international_cycle_cap: big_k,
            max_countries: gamma,
            chains_enabled: false,
        }
    }

    const U: Cap = Cap::Unbounded;
    fn f(n: usize) -> Cap {
        Cap::Finite(n)
    }

    #[test]
    fn single_two_cycle() {
        let g = graph(&[1, 1], &[(0, 1), (1, 0)]);
        let cycles = enumerate_cycles(&g, &PolicyConfig::uniform(1, f(2))).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].nodes, ids(&[0, 1]));
        assert_eq!(cycles[0].weight, 2.0);
    }

    #[test]
    fn complete_three_node_digraph() {
        let g = graph(&[1, 1, 1], &[(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)]);
        let cycles = enumerate_cycles(&g, &PolicyConfig::uniform(1, f(3))).unwrap();
        assert_eq!(cycles.len(), 5);
        assert_eq!(cycles.iter().filter(|c| c.len() == 2).count(), 3);
        assert!(cycles.iter().any(|c| c.nodes == ids(&[0, 1, 2])));
        assert!(cycles.iter().any(|c| c.nodes == ids(&[0, 2, 1])));
    }

    #[test]
    fn segment_cap_rejects_and_admits() {
        // a1 in C1, b1, b2 in C2; a1 -> b1 -> b2 -> a1
        let g = graph(&[1, 2, 2], &[(0, 1), (1, 2), (2, 0)]);
        let tight = policy2([f(3), f(3)], [f(3), f(1)], [U, U], [U, U], f(3), U);
        assert!(enumerate_cycles(&g, &tight).unwrap().is_empty());
        let loose = policy2([f(3), f(3)], [f(3), f(2)], [U, U], [U, U], f(3), U);
        let cycles = enumerate_cycles(&g, &loose).unwrap();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].nodes, ids(&[0, 1, 2]));
    }

    #[test]
    fn local_cycles_use_national_cap_only() {
        let p = policy2([f(3), f(2)], [U, U], [U, U], [U, U], f(4), U);
        assert!(is_valid_cycle(&cycle_of(&[1, 1, 1]), &p));
        assert!(!is_valid_cycle(&cycle_of(&[2, 2, 2]), &p));
        // international checks would pass, but local cycles cannot use them
        assert!(check_countries(&cycle_of(&[2, 2, 2]), &p));
    }

    #[test]
    fn international_four_cycle_passes_all_checks() {
        let p = policy2([f(4), f(4)], [f(2), f(2)], [f(2), f(2)], [f(2), f(2)], f(4), f(2));
        assert!(is_valid_cycle(&cycle_of(&[1, 1, 2, 2]), &p));
    }

    #[test]
    fn is_local_cases() {
        assert!(is_local(&cycle_of(&[1, 1, 1])));
        assert!(!is_local(&cycle_of(&[1, 2])));
        assert!(!is_local(&cycle_of(&[2, 2, 2, 1])));
    }

    #[test]
    fn country_checks() {
        let p = policy2([f(3), f(3)], [U, U], [U, U], [f(2), f(1)], f(3), f(2));
        assert!(check_countries(&cycle_of(&[1, 1, 2]), &p));
        let p = policy2([f(3), f(3)], [U, U], [U, U], [U, U], f(3), f(1));
        assert!(!check_countries(&cycle_of(&[1, 1, 2]), &p));
        let p = policy2([f(3), f(3)], [U, U], [U, U], [f(1), U], f(3), U);
        assert!(!check_countries(&cycle_of(&[1, 1, 2]), &p));
    }

    #[test]
    fn segment_checks() {
        let p = policy2([f(4), f(4)], [f(2), f(2)], [f(1), f(1)], [U, U], f(4), U);
        assert!(check_segments(&cycle_of(&[2, 1, 1, 2]), &p));
        assert_eq!(segment_runs(&cycle_of(&[2, 1, 1, 2]).countries), vec![(CountryId(1), 2), (CountryId(2), 2)]);
        let p = policy2([f(4), f(4)], [U, U], [f(1), U], [U, U], f(4), U);
        assert!(!check_segments(&cycle_of(&[1, 2, 1, 2]), &p));
        let p = policy2([f(4), f(4)], [f(2), U], [U, U], [U, U], f(4), U);
        assert!(!check_segments(&cycle_of(&[1, 1, 1, 2]), &p));
        // the wrap-around run (2, 2 | 2) has three nodes
        let p = policy2([f(4), f(4)], [U, f(2)], [U, U], [U, U], f(4), U);
        assert!(!check_segments(&cycle_of(&[2, 2, 1, 2]), &p));
    }

    #[test]
    fn unbounded_cap_is_an_error() {
        let g = graph(&[1, 1], &[(0, 1), (1, 0)]);
        assert!(matches!(
            enumerate_cycles(&g, &PolicyConfig::uniform(1, U)),
            Err(ModelError::Unsupported(_))
        ));
    }

    #[test]
    fn segment_enumeration() {
        let g = graph(&[1, 1], &[(0, 1)]);
        let p = policy2([f(2), f(2)], [f(2), f(2)], [U, U], [U, U], f(2), U);
        assert_eq!(enumerate_segments(&g, &PolicyConfig { countries: p.countries[..1].to_vec(), ..p.clone() }).unwrap().len(), 3);

        let g = graph(&[1, 1, 1], &[(0, 1), (1, 2)]);
        let p1 = PolicyConfig { countries: p.countries[..1].to_vec(), ..p.clone() };
        let segs = enumerate_segments(&g, &p1).unwrap();
        assert_eq!(segs.len(), 5);
        assert_eq!(segs.iter().filter(|s| s.arc_count() == 1).count(), 2);

        let mut single = p1.clone();
        single.countries[0].segment_node_cap = f(1);
        let segs = enumerate_segments(&g, &single).unwrap();
        assert_eq!(segs.len(), 3);
        assert!(segs.iter().all(|s| s.nodes.len() == 1));
    }

    #[test]
    fn paths_of_fixed_length() {
        let g = graph(&[1, 1, 1], &[(0, 1), (1, 2), (2, 0)]);
        // a directed triangle has three 2-arc paths and no 3-arc proper path
        assert_eq!(proper_paths(&g, 2, |_, _| true).len(), 3);
        assert!(proper_paths(&g, 3, |_, _| true).is_empty());
    }

    #[test]
    fn cycle_from_nodes_canonicalises() {
        let g = graph(&[1, 1, 1], &[(0, 1), (1, 2), (2, 0)]);
        let c = Cycle::from_nodes(&g, &ids(&[2, 0, 1])).unwrap();
        assert_eq!(c.nodes, ids(&[0, 1, 2]));
        assert!(Cycle::from_nodes(&g, &ids(&[0, 2, 1])).is_none());
    }
}
