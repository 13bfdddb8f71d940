//! Reference implementations used as test oracles. Nothing here calls the
//! library's enumeration or solver code.

#![allow(dead_code)]

use std::collections::HashMap;

use itertools::Itertools;
use kep_core::graph::{Arc, BloodGroup, Node, NodeKind, Patient};
use kep_core::{Cap, CompatibilityGraph, CountryId, CountryPolicy, NodeId, PolicyConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn pair_node(id: usize, country: usize) -> Node {
    Node {
        id: NodeId(id),
        country: CountryId(country),
        kind: NodeKind::PatientDonorPair,
        donor_blood: BloodGroup::O,
        patient: Some(Patient { blood: BloodGroup::O, pra: 0.0 }),
    }
}

pub fn altruist_node(id: usize, country: usize) -> Node {
    Node { id: NodeId(id), country: CountryId(country), kind: NodeKind::AltruisticDonor, donor_blood: BloodGroup::O, patient: None }
}

/// Random two-country digraph with unit weights. Every ordered pair gets an
/// arc with probability `density`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> CompatibilityGraph {
    let nodes = (0..n).map(|i| pair_node(i, rng.gen_range(1..=2))).collect();
    let mut arcs = Vec::new();
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.gen_bool(density) {
                arcs.push(Arc { source: NodeId(s), target: NodeId(t), weight: 1.0 });
            }
        }
    }
    CompatibilityGraph::new(nodes, arcs, 2).unwrap()
}

fn random_cap(rng: &mut ChaCha8Rng, lo: usize, hi: usize, unbounded_p: f64) -> Cap {
    if rng.gen_bool(unbounded_p) {
        Cap::Unbounded
    } else {
        Cap::Finite(rng.gen_range(lo..=hi))
    }
}

/// Random two-country policy with every cycle cap finite.
pub fn random_finite_policy(rng: &mut ChaCha8Rng) -> PolicyConfig {
    let countries = (0..2)
        .map(|_| CountryPolicy {
            national_cycle_cap: Cap::Finite(rng.gen_range(2..=4)),
            segment_node_cap: random_cap(rng, 1, 3, 0.3),
            max_segments: random_cap(rng, 1, 2, 0.5),
            max_pairs: random_cap(rng, 1, 4, 0.5),
        })
        .collect();
    PolicyConfig {
        countries,
        international_cycle_cap: Cap::Finite(rng.gen_range(2..=5)),
        max_countries: random_cap(rng, 1, 2, 0.7),
        chains_enabled: false,
    }
}

/// All simple cycles as node sequences starting at their minimum node,
/// found by trying every ordering of every node subset.
pub fn brute_force_cycles(g: &CompatibilityGraph, max_len: usize) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    let mut out = Vec::new();
    for first in 0..n {
        let rest: Vec<usize> = (first + 1..n).collect();
        for k in 1..max_len.min(n - first) {
            for perm in rest.iter().copied().permutations(k) {
                let mut seq = vec![first];
                seq.extend(perm);
                let closed = (0..seq.len()).all(|i| g.has_arc(NodeId(seq[i]), NodeId(seq[(i + 1) % seq.len()])));
                if closed {
                    out.push(seq);
                }
            }
        }
    }
    out
}

/// Country runs of a cyclic sequence: rotate to start at a border, then
/// collect maximal equal stretches.
fn runs(countries: &[usize]) -> Vec<(usize, usize)> {
    let n = countries.len();
    let Some(start) = (0..n).find(|&i| countries[i] != countries[(i + n - 1) % n]) else {
        return vec![(countries[0], n)];
    };
    let rotated: Vec<usize> = (0..n).map(|i| countries[(start + i) % n]).collect();
    rotated.iter().copied().dedup_with_count().map(|(len, c)| (c, len)).collect()
}

/// Whether a cycle with the given country sequence is allowed.
pub fn oracle_valid(countries: &[usize], p: &PolicyConfig) -> bool {
    let len = countries.len();
    let distinct: Vec<usize> = countries.iter().copied().unique().collect();
    if distinct.len() == 1 {
        return p.countries[distinct[0] - 1].national_cycle_cap.allows(len);
    }
    if !p.international_cycle_cap.allows(len) || !p.max_countries.allows(distinct.len()) {
        return false;
    }
    let mut segments: HashMap<usize, usize> = HashMap::new();
    let mut pairs: HashMap<usize, usize> = HashMap::new();
    for (c, l) in runs(countries) {
        if !p.countries[c - 1].segment_node_cap.allows(l) {
            return false;
        }
        *segments.entry(c).or_default() += 1;
        *pairs.entry(c).or_default() += l;
    }
    segments.iter().all(|(c, s)| p.countries[c - 1].max_segments.allows(*s))
        && pairs.iter().all(|(c, s)| p.countries[c - 1].max_pairs.allows(*s))
}

pub fn countries_of(g: &CompatibilityGraph, seq: &[usize]) -> Vec<usize> {
    seq.iter().map(|&v| g.country_of(NodeId(v)).0).collect()
}

/// Maximum total weight of node-disjoint sets drawn from `items`, each
/// given as (node list, weight), by dynamic programming over node subsets.
pub fn max_packing(n: usize, items: &[(Vec<usize>, f64)]) -> f64 {
    assert!(n <= 20);
    let mut by_min: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (nodes, w) in items {
        let mask = nodes.iter().fold(0u32, |m, &v| m | (1 << v));
        by_min[*nodes.iter().min().unwrap()].push((mask, *w));
    }
    let full = (1u32 << n) - 1;
    let mut memo: HashMap<u32, f64> = HashMap::new();
    fn best(avail: u32, by_min: &[Vec<(u32, f64)>], memo: &mut HashMap<u32, f64>) -> f64 {
        if avail == 0 {
            return 0.0;
        }
        if let Some(&v) = memo.get(&avail) {
            return v;
        }
        let v = avail.trailing_zeros() as usize;
        let rest = avail & !(1 << v);
        let mut result = best(rest, by_min, memo);
        for &(mask, w) in &by_min[v] {
            if mask & avail == mask {
                result = result.max(w + best(avail & !mask, by_min, memo));
            }
        }
        memo.insert(avail, result);
        result
    }
    best(full, &by_min, &mut memo)
}

/// Optimal cycle packing under `p`, from brute-force cycles of length at
/// most `max_len`.
pub fn oracle_optimum(g: &CompatibilityGraph, p: &PolicyConfig, max_len: usize) -> f64 {
    let items: Vec<(Vec<usize>, f64)> = brute_force_cycles(g, max_len)
        .into_iter()
        .filter(|c| oracle_valid(&countries_of(g, c), p))
        .map(|c| {
            let l = c.len() as f64;
            (c, l)
        })
        .collect();
    max_packing(g.num_nodes(), &items)
}
