use std::collections::BTreeMap;

use crate::enumeration::{Cycle, Segment};
use crate::error::ModelError;
use crate::graph::{CompatibilityGraph, CountryId, NodeId};
use crate::policy::{Cap, PolicyConfig};

use super::{ConstraintTag, IpModel, ModelBuilder, Relation, VarId, VarKind};

/// Two-country formulation where one country (the bounded side) caps its
/// cycles and the other does not.
///
/// Cycles and segments of the bounded side are enumerated; every arc that
/// touches the unbounded side gets a variable. Each international cycle
/// crosses into the bounded side exactly once, and is assigned to the layer
/// of the node where its segment ends; arcs leaving the bounded side exist
/// only in their source's layer, so a layer holds at most one such cycle.
/// Cycles entirely inside the unbounded side may use any layer.
pub fn build_bounded_unbounded_model(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    cycles: &[Cycle],
    segments: &[Segment],
) -> Result<IpModel, ModelError> {
    if g.num_countries() != 2 {
        return Err(ModelError::Unsupported(format!(
            "the bounded/unbounded formulation needs exactly two countries, got {}",
            g.num_countries()
        )));
    }
    policy.check_countries(2)?;
    let caps = [policy.countries[0].national_cycle_cap, policy.countries[1].national_cycle_cap];
    let bounded = match caps {
        [Cap::Finite(_), Cap::Unbounded] => CountryId(1),
        [Cap::Unbounded, Cap::Finite(_)] => CountryId(2),
        _ => {
            return Err(ModelError::Unsupported(
                "the bounded/unbounded formulation needs one finite and one unbounded national cap".into(),
            ))
        }
    };
    let cap = policy.country(bounded).national_cycle_cap.finite().unwrap();
    let n = g.num_nodes();
    let in_bounded = |v: NodeId| g.country_of(v) == bounded;
    for c in cycles {
        if let Some(bad) = c.nodes.iter().find(|v| v.0 >= n) {
            return Err(ModelError::UnknownNode(bad.0));
        }
        if !c.nodes.iter().all(|&v| in_bounded(v)) || c.len() > cap {
            return Err(ModelError::Invalid("cycle list must hold national cycles of the bounded country".into()));
        }
    }
    for s in segments {
        if let Some(bad) = s.nodes.iter().find(|v| v.0 >= n) {
            return Err(ModelError::UnknownNode(bad.0));
        }
        if !s.nodes.iter().all(|&v| in_bounded(v)) || s.arcs().any(|(u, v)| !g.has_arc(u, v)) {
            return Err(ModelError::Invalid("segment list must hold paths of the bounded country".into()));
        }
    }

    let mut b = ModelBuilder::default();
    let edge = |u: NodeId, v: NodeId| VarKind::Edge { source: u, target: v };
    let layered = |t: usize, u: NodeId, v: NodeId| VarKind::LayerEdge { layer: t, source: u, target: v };

    // Layer of each bounded node that can hand over to the other side.
    let mut layer_of: BTreeMap<NodeId, usize> = BTreeMap::new();
    for v in g.nodes_of(bounded) {
        if g.out_arcs(v).any(|a| !in_bounded(a.target)) {
            let t = layer_of.len() + 1;
            layer_of.insert(v, t);
        }
    }
    let layers = layer_of.len().max(1);

    let arcs: Vec<(NodeId, NodeId, f64)> = g
        .arcs()
        .iter()
        .filter(|a| !(in_bounded(a.source) && in_bounded(a.target)))
        .map(|a| (a.source, a.target, a.weight))
        .collect();
    for &(u, v, w) in &arcs {
        let y = b.var(edge(u, v));
        b.objective(y, w);
    }
    let mut cover: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for c in cycles {
        let x = b.add_cycle(c.clone());
        b.objective(x, c.weight);
        for v in &c.nodes {
            cover[v.0].push(x);
        }
    }
    let enters = |v: NodeId| g.in_arcs(v).any(|a| !in_bounded(a.source));
    let usable: Vec<&Segment> = segments.iter().filter(|s| enters(s.first()) && layer_of.contains_key(&s.last())).collect();
    let mut starts: Vec<Vec<VarId>> = vec![Vec::new(); n];
    let mut ends: Vec<Vec<VarId>> = vec![Vec::new(); n];
    let mut segment_vars = Vec::new();
    for s in &usable {
        let z = b.add_segment((*s).clone());
        b.objective(z, s.weight);
        for v in &s.nodes {
            cover[v.0].push(z);
        }
        starts[s.first().0].push(z);
        ends[s.last().0].push(z);
        segment_vars.push(z);
    }

    // Layer copies of each arc variable.
    let layers_of = |u: NodeId| -> Vec<usize> {
        match layer_of.get(&u) {
            Some(&t) => vec![t],
            None if in_bounded(u) => Vec::new(),
            None => (1..=layers).collect(),
        }
    };
    for &(u, v, _) in &arcs {
        let y = b.var(edge(u, v));
        let mut terms: Vec<(VarId, f64)> = layers_of(u).into_iter().map(|t| (b.var(layered(t, u, v)), 1.0)).collect();
        terms.push((y, -1.0));
        b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::LayerSplit);
    }

    // Layer conservation on the unbounded side.
    for t in 1..=layers {
        for v in g.nodes().iter().map(|n| n.id).filter(|&v| !in_bounded(v)) {
            let mut terms = Vec::new();
            for a in g.in_arcs(v) {
                if layers_of(a.source).contains(&t) {
                    terms.push((b.var(layered(t, a.source, v)), 1.0));
                }
            }
            for a in g.out_arcs(v) {
                terms.push((b.var(layered(t, v, a.target)), -1.0));
            }
            b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::LayerConservation);
        }
    }

    for v in 0..n {
        let node = NodeId(v);
        let out: Vec<(VarId, f64)> = arcs
            .iter()
            .filter(|a| a.0 == node)
            .map(|&(u, w, _)| (b.var(edge(u, w)), 1.0))
            .collect();
        b.constrain(out.clone(), Relation::Le, 1.0, ConstraintTag::OutDegree);
        if !in_bounded(node) {
            continue;
        }
        b.constrain(cover[v].iter().map(|&x| (x, 1.0)), Relation::Le, 1.0, ConstraintTag::CoverPacking);
        // Entering the bounded side starts a segment here.
        let mut terms: Vec<(VarId, f64)> = arcs
            .iter()
            .filter(|a| a.1 == node)
            .map(|&(u, w, _)| (b.var(edge(u, w)), 1.0))
            .collect();
        terms.extend(starts[v].iter().map(|&z| (z, -1.0)));
        b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::SegmentStart);
        // Leaving it ends one.
        let mut terms = out;
        terms.extend(ends[v].iter().map(|&z| (z, -1.0)));
        b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::SegmentEnd);
    }

    // A segment is entered and left within the layer of its last node.
    for (s, &z) in usable.iter().zip(&segment_vars) {
        let t = layer_of[&s.last()];
        let mut terms: Vec<(VarId, f64)> = Vec::new();
        for a in g.in_arcs(s.first()).filter(|a| !in_bounded(a.source)) {
            terms.push((b.var(layered(t, a.source, s.first())), 1.0));
        }
        for a in g.out_arcs(s.last()).filter(|a| !in_bounded(a.target)) {
            terms.push((b.var(layered(t, s.last(), a.target)), 1.0));
        }
        terms.push((z, -2.0));
        b.constrain(terms, Relation::Ge, 0.0, ConstraintTag::LayerPinning);
    }
    Ok(b.finish())
}
