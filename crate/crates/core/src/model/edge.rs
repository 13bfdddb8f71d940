use crate::enumeration::proper_paths;
use crate::error::ModelError;
use crate::graph::{CompatibilityGraph, NodeId};

use super::{ConstraintTag, IpModel, ModelBuilder, Relation, VarId, VarKind};

fn edge_var(b: &mut ModelBuilder, s: NodeId, t: NodeId) -> VarId {
    b.var(VarKind::Edge { source: s, target: t })
}

/// Arc variables with flow conservation and out-degree rows; the shared part
/// of the edge and circulation formulations.
fn circulation(g: &CompatibilityGraph) -> ModelBuilder {
    let mut b = ModelBuilder::default();
    for a in g.arcs() {
        let y = edge_var(&mut b, a.source, a.target);
        b.objective(y, a.weight);
    }
    for v in 0..g.num_nodes() {
        let v = NodeId(v);
        let mut terms: Vec<(VarId, f64)> = g.in_arcs(v).map(|a| (edge_var(&mut b, a.source, v), 1.0)).collect();
        terms.extend(g.out_arcs(v).map(|a| (edge_var(&mut b, v, a.target), -1.0)).collect::<Vec<_>>());
        b.constrain(terms, Relation::Eq, 0.0, ConstraintTag::FlowConservation);
    }
    for v in 0..g.num_nodes() {
        let v = NodeId(v);
        let terms: Vec<(VarId, f64)> = g.out_arcs(v).map(|a| (edge_var(&mut b, v, a.target), 1.0)).collect();
        b.constrain(terms, Relation::Le, 1.0, ConstraintTag::OutDegree);
    }
    b
}

/// Arc formulation with cycle cap `max_len`: a selected arc set is a union
/// of disjoint cycles, and no proper path of `max_len` arcs is fully
/// selected, which rules out every longer cycle.
pub fn build_edge_model(g: &CompatibilityGraph, max_len: usize) -> Result<IpModel, ModelError> {
    if max_len < 2 {
        return Err(ModelError::Invalid(format!("cycle cap {max_len} is below 2")));
    }
    let mut b = circulation(g);
    for path in proper_paths(g, max_len, |_, _| true) {
        let terms: Vec<(VarId, f64)> = path.windows(2).map(|w| (edge_var(&mut b, w[0], w[1]), 1.0)).collect();
        b.constrain(terms, Relation::Le, (max_len - 1) as f64, ConstraintTag::PathLength);
    }
    Ok(b.finish())
}

/// Arc formulation without a length cap: any vertex-disjoint set of cycles.
pub fn build_circulation_model(g: &CompatibilityGraph) -> IpModel {
    circulation(g).finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::tests::graph;

    #[test]
    fn two_cycle_rows() {
        let g = graph(&[1, 1], &[(0, 1), (1, 0)]);
        let m = build_edge_model(&g, 2).unwrap();
        assert_eq!(m.num_vars(), 2);
        let h = m.tag_histogram();
        assert_eq!(h[&ConstraintTag::FlowConservation], 2);
        assert_eq!(h[&ConstraintTag::OutDegree], 2);
        // Paths with two arcs would need three distinct nodes.
        assert!(!h.contains_key(&ConstraintTag::PathLength));
        assert!(m.is_feasible(&[true, true]));
        assert!(!m.is_feasible(&[true, false]));
    }

    #[test]
    fn triangle_is_cut_by_path_rows() {
        let g = graph(&[1, 1, 1], &[(0, 1), (1, 2), (2, 0)]);
        let m = build_edge_model(&g, 2).unwrap();
        assert_eq!(m.tag_histogram()[&ConstraintTag::PathLength], 3);
        assert!(!m.is_feasible(&[true, true, true]));
        let m = build_edge_model(&g, 3).unwrap();
        assert!(m.is_feasible(&[true, true, true]));
        let c = build_circulation_model(&g);
        assert!(c.is_feasible(&[true, true, true]));
        assert!(!c.tag_histogram().contains_key(&ConstraintTag::PathLength));
    }

    #[test]
    fn cap_below_two_is_rejected() {
        let g = graph(&[1, 1], &[(0, 1), (1, 0)]);
        assert!(build_edge_model(&g, 1).is_err());
    }
}
