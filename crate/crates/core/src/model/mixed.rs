use std::collections::BTreeSet;

use crate::enumeration::{is_local, proper_paths, Cycle, Segment};
use crate::error::ModelError;
use crate::graph::{CompatibilityGraph, NodeId};
use crate::policy::{Cap, PolicyConfig};

use super::{ConstraintTag, IpModel, ModelBuilder, Relation, VarId, VarKind};

fn check_inputs(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    cycles: &[Cycle],
    segments: &[Segment],
) -> Result<(), ModelError> {
    policy.check_countries(g.num_countries())?;
    let n = g.num_nodes();
    for c in cycles {
        if let Some(bad) = c.nodes.iter().find(|v| v.0 >= n) {
            return Err(ModelError::UnknownNode(bad.0));
        }
        if !is_local(c) {
            return Err(ModelError::Invalid("national cycle list contains an international cycle".into()));
        }
        if !policy.country(c.countries[0]).national_cycle_cap.allows(c.len()) {
            return Err(ModelError::Invalid(format!(
                "national cycle of length {} exceeds the cap of country {}",
                c.len(),
                c.countries[0]
            )));
        }
    }
    for s in segments {
        if let Some(bad) = s.nodes.iter().find(|v| v.0 >= n) {
            return Err(ModelError::UnknownNode(bad.0));
        }
        if s.nodes.iter().any(|&v| g.country_of(v) != s.country) {
            return Err(ModelError::Invalid("segment leaves its country".into()));
        }
        if s.arcs().any(|(u, v)| !g.has_arc(u, v)) {
            return Err(ModelError::Invalid("segment uses a missing arc".into()));
        }
        if !policy.country(s.country).segment_node_cap.allows(s.nodes.len()) {
            return Err(ModelError::Invalid(format!(
                "segment with {} nodes exceeds the cap of country {}",
                s.nodes.len(),
                s.country
            )));
        }
    }
    Ok(())
}

/// Whether segment, pair or country limits can bind inside one
/// international cycle, in which case layer variables are required.
pub fn layers_needed(g: &CompatibilityGraph, policy: &PolicyConfig) -> bool {
    let longest = policy.international_cycle_cap.finite().unwrap_or(g.num_nodes());
    let binds = |cap: Cap, reachable: usize| cap.finite().is_some_and(|c| c < reachable);
    let present = g.countries().filter(|&k| g.nodes_of(k).next().is_some()).count();
    g.countries().any(|k| {
        let size = g.nodes_of(k).count();
        let p = policy.country(k);
        binds(p.max_segments, (longest / 2).min(size)) || binds(p.max_pairs, (longest - 1).min(size))
    }) || binds(policy.max_countries, present.min(longest))
}

/// Number of layers used when none is given: one per possible disjoint
/// international cycle. Each such cycle enters at least two nodes through
/// international arcs, so half the count of those nodes suffices.
pub fn default_layer_count(g: &CompatibilityGraph) -> usize {
    let entered = (0..g.num_nodes()).filter(|&v| g.in_arcs(NodeId(v)).any(|a| g.is_international(a))).count();
    (entered / 2).max(1)
}

/// Mixed formulation for international cooperation when cycles may be
/// unbounded: national cycles and segments are enumerated under their
/// finite caps, international cycles are assembled from arcs.
///
/// Arc variables come in two kinds, one for arcs used in national cycles
/// and one for arcs used in international cycles. Layer constraints are
/// appended automatically when some per-cycle limit can bind.
pub fn build_mixed_model(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    national_cycles: &[Cycle],
    segments: &[Segment],
) -> Result<IpModel, ModelError> {
    policy.validate()?;
    check_inputs(g, policy, national_cycles, segments)?;
    let n = g.num_nodes();
    let mut b = ModelBuilder::default();

    for k in g.countries() {
        if let (Some(l), Some(big)) =
            (policy.country(k).segment_node_cap.finite(), policy.international_cycle_cap.finite())
        {
            if l > big && policy.country(k).max_segments != Cap::Finite(1) {
                b.note(format!(
                    "country {k}: segment cap {l} exceeds the international cycle cap {big}"
                ));
            }
        }
    }

    let national = |u: NodeId, v: NodeId| VarKind::NationalEdge { source: u, target: v };
    let international = |u: NodeId, v: NodeId| VarKind::InternationalEdge { source: u, target: v };

    // Arcs that can appear in a national cycle or in an international one.
    let mut national_arcs: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
    for c in national_cycles {
        national_arcs.extend(c.arcs());
    }
    // With fewer than two countries allowed per cycle nothing crosses a border.
    let cross_border = policy.max_countries.allows(2);
    let mut international_arcs: BTreeSet<(NodeId, NodeId)> =
        g.international_arcs().filter(|_| cross_border).map(|a| (a.source, a.target)).collect();
    let has_intl_in: Vec<bool> = (0..n).map(|v| g.in_arcs(NodeId(v)).any(|a| g.is_international(a))).collect();
    let has_intl_out: Vec<bool> = (0..n).map(|v| g.out_arcs(NodeId(v)).any(|a| g.is_international(a))).collect();
    // A segment is only usable if it can be entered and left across a border.
    let usable: Vec<&Segment> =
        segments.iter().filter(|s| cross_border && has_intl_in[s.first().0] && has_intl_out[s.last().0]).collect();
    for s in &usable {
        international_arcs.extend(s.arcs());
    }

    let weight = |u: NodeId, v: NodeId| g.arc_weight(u, v).expect("arc exists");
    for &(u, v) in &national_arcs {
        let y = b.var(national(u, v));
        b.objective(y, weight(u, v));
    }
    for &(u, v) in &international_arcs {
        let y = b.var(international(u, v));
        b.objective(y, weight(u, v));
    }

    let mut cover: Vec<Vec<VarId>> = vec![Vec::new(); n];
    let mut cycle_vars = Vec::new();
    for c in national_cycles {
        let x = b.add_cycle(c.clone());
        for v in &c.nodes {
            cover[v.0].push(x);
        }
        cycle_vars.push(x);
    }
    let mut segment_vars = Vec::new();
    for s in &usable {
        let z = b.add_segment((*s).clone());
        for v in &s.nodes {
            cover[v.0].push(z);
        }
        segment_vars.push(z);
    }

    // Indicators of an international arc entering or leaving a node.
    let mut in_ind: Vec<Option<VarId>> = vec![None; n];
    let mut out_ind: Vec<Option<VarId>> = vec![None; n];
    for s in &usable {
        in_ind[s.first().0].get_or_insert_with(|| b.var(VarKind::InIndicator(s.first())));
        out_ind[s.last().0].get_or_insert_with(|| b.var(VarKind::OutIndicator(s.last())));
    }
    for v in 0..n {
        let node = NodeId(v);
        if let Some(e) = in_ind[v] {
            let mut terms = vec![(e, 1.0)];
            for a in g.in_arcs(node).filter(|a| g.is_international(a)) {
                terms.push((b.var(international(a.source, node)), -1.0));
            }
            b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::InIndicatorDef);
        }
        if let Some(e) = out_ind[v] {
            let mut terms = vec![(e, 1.0)];
            for a in g.out_arcs(node).filter(|a| g.is_international(a)) {
                terms.push((b.var(international(node, a.target)), -1.0));
            }
            b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::OutIndicatorDef);
        }
    }

    // Conservation per arc kind.
    for v in 0..n {
        let node = NodeId(v);
        for (arcs, kind) in [
            (&national_arcs, ConstraintTag::NationalConservation),
            (&international_arcs, ConstraintTag::InternationalConservation),
        ] {
            let make = |u: NodeId, v: NodeId| {
                if kind == ConstraintTag::NationalConservation {
                    national(u, v)
                } else {
                    international(u, v)
                }
            };
            let mut terms = Vec::new();
            for a in g.in_arcs(node).filter(|a| arcs.contains(&(a.source, node))) {
                terms.push((b.var(make(a.source, node)), 1.0));
            }
            for a in g.out_arcs(node).filter(|a| arcs.contains(&(node, a.target))) {
                terms.push((b.var(make(node, a.target)), -1.0));
            }
            b.constrain(terms, Relation::Eq, 0.0, kind);
        }
    }

    // A node gives only when covered, and is covered at most once.
    for v in 0..n {
        let node = NodeId(v);
        let mut terms = Vec::new();
        for a in g.out_arcs(node) {
            if national_arcs.contains(&(node, a.target)) {
                terms.push((b.var(national(node, a.target)), 1.0));
            }
            if international_arcs.contains(&(node, a.target)) {
                terms.push((b.var(international(node, a.target)), 1.0));
            }
        }
        terms.extend(cover[v].iter().map(|&x| (x, -1.0)));
        b.constrain(terms, Relation::Le, 0.0, ConstraintTag::CoverLink);
        b.constrain(cover[v].iter().map(|&x| (x, 1.0)), Relation::Le, 1.0, ConstraintTag::CoverPacking);
    }

    // National cycles are selected exactly when all their arcs are.
    for (c, &x) in national_cycles.iter().zip(&cycle_vars) {
        let len = c.len() as f64;
        let arcs: Vec<VarId> = c.arcs().map(|(u, v)| b.var(national(u, v))).collect();
        let mut terms = vec![(x, len)];
        terms.extend(arcs.iter().map(|&y| (y, -1.0)));
        b.constrain(terms, Relation::Le, 0.0, ConstraintTag::CycleUsesArcs);
        let mut terms: Vec<(VarId, f64)> = arcs.iter().map(|&y| (y, 1.0)).collect();
        terms.push((x, -1.0));
        b.constrain(terms, Relation::Le, len - 1.0, ConstraintTag::CycleSelectedByArcs);
    }

    // Segments are selected exactly when their arcs are used and they are
    // entered and left through international arcs.
    for (s, &z) in usable.iter().zip(&segment_vars) {
        let size = (s.arc_count() + 2) as f64;
        let mut used: Vec<VarId> = s.arcs().map(|(u, v)| b.var(international(u, v))).collect();
        used.push(in_ind[s.first().0].expect("indicator exists"));
        used.push(out_ind[s.last().0].expect("indicator exists"));
        let mut terms = vec![(z, size)];
        terms.extend(used.iter().map(|&y| (y, -1.0)));
        b.constrain(terms, Relation::Le, 0.0, ConstraintTag::SegmentUsesArcs);
        let mut terms: Vec<(VarId, f64)> = used.iter().map(|&y| (y, 1.0)).collect();
        terms.push((z, -1.0));
        b.constrain(terms, Relation::Le, size - 1.0, ConstraintTag::SegmentSelectedByArcs);
    }

    // Length caps as path cuts.
    if let Cap::Finite(big) = policy.international_cycle_cap {
        for path in proper_paths(g, big, |u, v| international_arcs.contains(&(u, v))) {
            let terms: Vec<(VarId, f64)> = path.windows(2).map(|w| (b.var(international(w[0], w[1])), 1.0)).collect();
            b.constrain(terms, Relation::Le, (big - 1) as f64, ConstraintTag::InternationalPathLength);
        }
    }
    for k in g.countries() {
        let p = policy.country(k);
        let in_k = |u: NodeId, v: NodeId| g.country_of(u) == k && g.country_of(v) == k;
        if let Cap::Finite(cap) = p.national_cycle_cap {
            for path in proper_paths(g, cap, |u, v| in_k(u, v) && national_arcs.contains(&(u, v))) {
                let terms: Vec<(VarId, f64)> = path.windows(2).map(|w| (b.var(national(w[0], w[1])), 1.0)).collect();
                b.constrain(terms, Relation::Le, (cap - 1) as f64, ConstraintTag::NationalPathLength);
            }
        }
        if let Cap::Finite(nodes) = p.segment_node_cap {
            // A run of `nodes` national arcs would span `nodes + 1` nodes.
            for path in proper_paths(g, nodes, |u, v| in_k(u, v) && international_arcs.contains(&(u, v))) {
                let terms: Vec<(VarId, f64)> =
                    path.windows(2).map(|w| (b.var(international(w[0], w[1])), 1.0)).collect();
                b.constrain(terms, Relation::Le, (nodes - 1) as f64, ConstraintTag::SegmentPathLength);
            }
        }
    }

    let model = b.finish();
    if !international_arcs.is_empty() && layers_needed(g, policy) {
        add_layer_constraints(model, g, policy, default_layer_count(g))
    } else {
        Ok(model)
    }
}

/// Splits international arc usage into `layers` copies, one per
/// international cycle, and bounds per cycle the segments and pairs of each
/// country and the number of countries involved.
pub fn add_layer_constraints(
    model: IpModel,
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    layers: usize,
) -> Result<IpModel, ModelError> {
    if layers == 0 {
        return Err(ModelError::Invalid("layer count must be positive".into()));
    }
    if model.variables.iter().any(|v| matches!(v, VarKind::LayerEdge { .. })) {
        return Err(ModelError::Invalid("model already has layer variables".into()));
    }
    policy.check_countries(g.num_countries())?;
    let arcs: Vec<(NodeId, NodeId)> = model
        .variables
        .iter()
        .filter_map(|v| match *v {
            VarKind::InternationalEdge { source, target } => Some((source, target)),
            _ => None,
        })
        .collect();
    let mut b = ModelBuilder::from_model(model);
    let layer = |t: usize, (u, v): (NodeId, NodeId)| VarKind::LayerEdge { layer: t, source: u, target: v };

    for &arc in &arcs {
        let y = b.get(VarKind::InternationalEdge { source: arc.0, target: arc.1 }).unwrap();
        let mut terms: Vec<(VarId, f64)> = (1..=layers).map(|t| (b.var(layer(t, arc)), 1.0)).collect();
        terms.push((y, -1.0));
        b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::LayerSplit);
    }
    for t in 1..=layers {
        for v in 0..g.num_nodes() {
            let node = NodeId(v);
            let mut terms = Vec::new();
            for &arc in &arcs {
                if arc.1 == node {
                    terms.push((b.var(layer(t, arc)), 1.0));
                }
                if arc.0 == node {
                    terms.push((b.var(layer(t, arc)), -1.0));
                }
            }
            b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::LayerConservation);
        }
        let mut activations = Vec::new();
        for k in g.countries() {
            let p = policy.country(k);
            let into_k: Vec<(NodeId, NodeId)> = arcs.iter().copied().filter(|a| g.country_of(a.1) == k).collect();
            let crossing: Vec<(NodeId, NodeId)> =
                into_k.iter().copied().filter(|a| g.country_of(a.0) != k).collect();
            if let Cap::Finite(cap) = p.max_segments {
                let terms: Vec<(VarId, f64)> = crossing.iter().map(|&a| (b.var(layer(t, a)), 1.0)).collect();
                b.constrain(terms, Relation::Le, cap as f64, ConstraintTag::LayerSegmentCap);
            }
            if let Cap::Finite(cap) = p.max_pairs {
                let terms: Vec<(VarId, f64)> = into_k.iter().map(|&a| (b.var(layer(t, a)), 1.0)).collect();
                b.constrain(terms, Relation::Le, cap as f64, ConstraintTag::LayerPairCap);
            }
            if policy.max_countries.is_finite() && !crossing.is_empty() {
                let size = g.nodes_of(k).count() as f64;
                let active = b.var(VarKind::CountryLayer { country: k, layer: t });
                let mut terms: Vec<(VarId, f64)> = crossing.iter().map(|&a| (b.var(layer(t, a)), 1.0)).collect();
                terms.push((active, -size));
                b.constrain(terms, Relation::Le, 0.0, ConstraintTag::CountryActivation);
                activations.push(active);
            }
        }
        if let Cap::Finite(gamma) = policy.max_countries {
            b.constrain(activations.iter().map(|&a| (a, 1.0)), Relation::Le, gamma as f64, ConstraintTag::CountryCap);
        }
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::{enumerate_national_cycles, enumerate_segments};
    use crate::graph::tests::graph;
    use crate::policy::CountryPolicy;

    fn policy(k: [Cap; 2], l: [Cap; 2], lambda: Cap, big: Cap) -> PolicyConfig {
        PolicyConfig {
            countries: (0..2)
                .map(|i| CountryPolicy {
                    national_cycle_cap: k[i],
                    segment_node_cap: l[i],
                    max_segments: lambda,
                    max_pairs: Cap::Unbounded,
                })
                .collect(),
            international_cycle_cap: big,
            max_countries: Cap::Unbounded,
            chains_enabled: false,
        }
    }

    fn build(g: &CompatibilityGraph, p: &PolicyConfig) -> IpModel {
        let mut cycles = Vec::new();
        for k in g.countries() {
            cycles.extend(enumerate_national_cycles(g, p, k).unwrap());
        }
        let segs = enumerate_segments(g, p).unwrap();
        build_mixed_model(g, p, &cycles, &segs).unwrap()
    }

    #[test]
    fn structure_of_a_small_two_country_graph() {
        // National 2-cycle in country 1 and an international 2-cycle.
        let g = graph(&[1, 1, 2], &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        let p = policy([Cap::Finite(2), Cap::Finite(2)], [Cap::Finite(1), Cap::Finite(1)], Cap::Unbounded, Cap::Unbounded);
        let m = build(&g, &p);
        assert!(m.validate().is_ok());
        assert_eq!(m.cycles.len(), 1);
        // Usable segments are (1) and (2).
        assert_eq!(m.segments.len(), 2);
        let h = m.tag_histogram();
        assert_eq!(h[&ConstraintTag::CycleUsesArcs], 1);
        assert_eq!(h[&ConstraintTag::SegmentUsesArcs], 2);
        assert!(!h.contains_key(&ConstraintTag::LayerSplit));
    }

    #[test]
    fn layers_added_when_segment_limit_binds() {
        let g = graph(&[1, 1, 2, 2], &[(0, 2), (2, 1), (1, 3), (3, 0)]);
        let p = policy([Cap::Finite(2), Cap::Finite(2)], [Cap::Finite(1), Cap::Finite(1)], Cap::Finite(1), Cap::Unbounded);
        assert!(layers_needed(&g, &p));
        let m = build(&g, &p);
        let h = m.tag_histogram();
        assert_eq!(h[&ConstraintTag::LayerSplit], 4);
        assert_eq!(h[&ConstraintTag::LayerSegmentCap], 2 * default_layer_count(&g));
        let again = add_layer_constraints(m, &g, &p, 2);
        assert!(again.is_err());
    }

    #[test]
    fn rejects_bad_inputs_and_warns() {
        let g = graph(&[1, 1, 2], &[(0, 1), (1, 0), (1, 2), (2, 1)]);
        let p = policy([Cap::Finite(2), Cap::Finite(2)], [Cap::Finite(3), Cap::Finite(1)], Cap::Unbounded, Cap::Finite(2));
        let m = build(&g, &p);
        assert_eq!(m.notes.len(), 1);
        let intl = Cycle::from_nodes(&g, &[NodeId(1), NodeId(2)]).unwrap();
        assert!(build_mixed_model(&g, &p, &[intl], &[]).is_err());
        let m = build(&g, &p);
        assert!(add_layer_constraints(m, &g, &p, 0).is_err());
    }
}
