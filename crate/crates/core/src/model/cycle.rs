use crate::enumeration::Cycle;
use crate::error::ModelError;

use super::{ConstraintTag, IpModel, ModelBuilder, Relation, VarId};

/// Cycle formulation: one binary per candidate cycle, weighted by the sum of
/// its arc weights (its length for unit weights), and one packing row per
/// node that lies on some cycle.
pub fn build_cycle_model(cycles: &[Cycle], num_nodes: usize) -> Result<IpModel, ModelError> {
    let mut b = ModelBuilder::default();
    let mut by_node: Vec<Vec<VarId>> = vec![Vec::new(); num_nodes];
    for c in cycles {
        if let Some(bad) = c.nodes.iter().find(|n| n.0 >= num_nodes) {
            return Err(ModelError::UnknownNode(bad.0));
        }
        let x = b.add_cycle(c.clone());
        b.objective(x, c.weight);
        for n in &c.nodes {
            by_node[n.0].push(x);
        }
    }
    for vars in by_node {
        b.constrain(vars.into_iter().map(|x| (x, 1.0)), Relation::Le, 1.0, ConstraintTag::NodePacking);
    }
    Ok(b.finish())
}
