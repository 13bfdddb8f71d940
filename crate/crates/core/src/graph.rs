//! Country-partitioned compatibility graphs.
//!
//! A node is a patient-donor pair, an altruistic donor, or (after chain
//! reduction) an altruist carrying an artificial patient. An arc `(i, j)`
//! means the donor of `i` can give to the patient of `j`; the transplant
//! belongs to the country of `j`.

use std::fmt;

use crate::error::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One-based country label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryId(pub usize);

impl CountryId {
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for CountryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BloodGroup {
    O,
    A,
    B,
    AB,
}

impl BloodGroup {
    pub const ALL: [BloodGroup; 4] = [BloodGroup::O, BloodGroup::A, BloodGroup::B, BloodGroup::AB];

    /// ABO rule: O gives to all, A to A/AB, B to B/AB, AB to AB only.
    pub fn can_donate_to(self, recipient: BloodGroup) -> bool {
        use BloodGroup::*;
        matches!(
            (self, recipient),
            (O, _) | (A, A) | (A, AB) | (B, B) | (B, AB) | (AB, AB)
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BloodGroup::O => "O",
            BloodGroup::A => "A",
            BloodGroup::B => "B",
            BloodGroup::AB => "AB",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "O" => Some(BloodGroup::O),
            "A" => Some(BloodGroup::A),
            "B" => Some(BloodGroup::B),
            "AB" => Some(BloodGroup::AB),
            _ => None,
        }
    }
}

impl fmt::Display for BloodGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    PatientDonorPair,
    AltruisticDonor,
    /// An altruist whose node also stands for an artificial patient that
    /// accepts every donor. Only present in chain-reduced graphs.
    ArtificialPatient,
}

impl NodeKind {
    pub fn token(self) -> &'static str {
        match self {
            NodeKind::PatientDonorPair => "pair",
            NodeKind::AltruisticDonor => "altruist",
            NodeKind::ArtificialPatient => "artificial",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "pair" => Some(NodeKind::PatientDonorPair),
            "altruist" => Some(NodeKind::AltruisticDonor),
            "artificial" => Some(NodeKind::ArtificialPatient),
            _ => None,
        }
    }

    /// Whether the node started out as an altruistic donor.
    pub fn is_altruist(self) -> bool {
        !matches!(self, NodeKind::PatientDonorPair)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patient {
    pub blood: BloodGroup,
    /// Panel reactive antibody level; the probability of a positive crossmatch.
    pub pra: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub country: CountryId,
    pub kind: NodeKind,
    pub donor_blood: BloodGroup,
    pub patient: Option<Patient>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub source: NodeId,
    pub target: NodeId,
    pub weight: f64,
}

/// Directed compatibility graph over nodes `0..n` split into countries `1..=N`.
#[derive(Debug, Clone)]
pub struct CompatibilityGraph {
    nodes: Vec<Node>,
    arcs: Vec<Arc>,
    num_countries: usize,
    // arc indices leaving each node, sorted by target
    out_arcs: Vec<Vec<usize>>,
    in_arcs: Vec<Vec<usize>>,
    // arc indices whose target lies in each country (A^k)
    into_country: Vec<Vec<usize>>,
}

impl CompatibilityGraph {
    pub fn new(nodes: Vec<Node>, arcs: Vec<Arc>, num_countries: usize) -> Result<Self, GraphError> {
        for (i, node) in nodes.iter().enumerate() {
            if node.id.0 != i {
                return Err(GraphError::NonDenseIds { position: i, id: node.id.0 });
            }
            if node.country.0 == 0 || node.country.0 > num_countries {
                return Err(GraphError::UnknownCountry(node.country.0));
            }
            match (node.kind, node.patient) {
                (NodeKind::PatientDonorPair, None) => {
                    return Err(GraphError::MissingPatient(node.id.0));
                }
                (NodeKind::AltruisticDonor | NodeKind::ArtificialPatient, Some(_)) => {
                    return Err(GraphError::AltruistWithPatient(node.id.0));
                }
                _ => {}
            }
        }
        let n = nodes.len();
        let mut out_arcs = vec![Vec::new(); n];
        let mut in_arcs = vec![Vec::new(); n];
        let mut into_country = vec![Vec::new(); num_countries];
        for (idx, arc) in arcs.iter().enumerate() {
            let (s, t) = (arc.source.0, arc.target.0);
            if s >= n || t >= n {
                return Err(GraphError::UnknownNode(s.max(t)));
            }
            if s == t {
                return Err(GraphError::SelfArc(s));
            }
            if !arc.weight.is_finite() || arc.weight < 0.0 {
                return Err(GraphError::BadWeight { from: s, to: t });
            }
            out_arcs[s].push(idx);
            in_arcs[t].push(idx);
            into_country[nodes[t].country.index()].push(idx);
        }
        for list in &mut out_arcs {
            list.sort_by_key(|&a| arcs[a].target);
            if let Some(w) = list.windows(2).find(|w| arcs[w[0]].target == arcs[w[1]].target) {
                let a = arcs[w[0]];
                return Err(GraphError::DuplicateArc { from: a.source.0, to: a.target.0 });
            }
        }
        for list in &mut in_arcs {
            list.sort_by_key(|&a| arcs[a].source);
        }
        Ok(Self { nodes, arcs, num_countries, out_arcs, in_arcs, into_country })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_countries(&self) -> usize {
        self.num_countries
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn country_of(&self, id: NodeId) -> CountryId {
        self.nodes[id.0].country
    }

    pub fn countries(&self) -> impl Iterator<Item = CountryId> {
        (1..=self.num_countries).map(CountryId)
    }

    pub fn nodes_of(&self, country: CountryId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().filter(move |n| n.country == country).map(|n| n.id)
    }

    pub fn out_arcs(&self, id: NodeId) -> impl Iterator<Item = &Arc> + '_ {
        self.out_arcs[id.0].iter().map(move |&a| &self.arcs[a])
    }

    pub fn in_arcs(&self, id: NodeId) -> impl Iterator<Item = &Arc> + '_ {
        self.in_arcs[id.0].iter().map(move |&a| &self.arcs[a])
    }

    pub fn successors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.out_arcs(id).map(|a| a.target)
    }

    /// Arcs pointing into `country`, i.e. the donations its patients receive.
    pub fn arcs_into(&self, country: CountryId) -> impl Iterator<Item = &Arc> + '_ {
        self.into_country[country.index()].iter().map(move |&a| &self.arcs[a])
    }

    pub fn arc_index(&self, source: NodeId, target: NodeId) -> Option<usize> {
        let list = &self.out_arcs[source.0];
        list.binary_search_by_key(&target, |&a| self.arcs[a].target)
            .ok()
            .map(|pos| list[pos])
    }

    pub fn has_arc(&self, source: NodeId, target: NodeId) -> bool {
        self.arc_index(source, target).is_some()
    }

    pub fn arc_weight(&self, source: NodeId, target: NodeId) -> Option<f64> {
        self.arc_index(source, target).map(|a| self.arcs[a].weight)
    }

    pub fn is_international(&self, arc: &Arc) -> bool {
        self.country_of(arc.source) != self.country_of(arc.target)
    }

    pub fn national_arcs(&self) -> impl Iterator<Item = &Arc> + '_ {
        self.arcs.iter().filter(|a| !self.is_international(a))
    }

    pub fn international_arcs(&self) -> impl Iterator<Item = &Arc> + '_ {
        self.arcs.iter().filter(|a| self.is_international(a))
    }

    pub fn num_altruists(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind.is_altruist()).count()
    }

    /// Induced subgraph on `keep` (in the given order), with ids re-densified.
    pub fn induced_subgraph(&self, keep: &[NodeId]) -> Subgraph {
        let mut position = vec![usize::MAX; self.nodes.len()];
        for (new, old) in keep.iter().enumerate() {
            position[old.0] = new;
        }
        let nodes = keep
            .iter()
            .enumerate()
            .map(|(new, old)| Node { id: NodeId(new), ..self.nodes[old.0].clone() })
            .collect();
        let mut arcs = Vec::new();
        for old in keep {
            for arc in self.out_arcs(*old) {
                let t = position[arc.target.0];
                if t != usize::MAX {
                    arcs.push(Arc {
                        source: NodeId(position[old.0]),
                        target: NodeId(t),
                        weight: arc.weight,
                    });
                }
            }
        }
        let graph = CompatibilityGraph::new(nodes, arcs, self.num_countries)
            .expect("induced subgraph of a valid graph is valid");
        Subgraph { graph, original: keep.to_vec() }
    }
}

/// A re-indexed subgraph together with the id of each node in its parent.
#[derive(Debug, Clone)]
pub struct Subgraph {
    pub graph: CompatibilityGraph,
    pub original: Vec<NodeId>,
}

impl Subgraph {
    pub fn to_parent(&self, id: NodeId) -> NodeId {
        self.original[id.0]
    }
}

/// Induced subgraph on the nodes of one country.
pub fn country_subgraph(g: &CompatibilityGraph, country: CountryId) -> Result<Subgraph, GraphError> {
    if country.0 == 0 || country.0 > g.num_countries() {
        return Err(GraphError::UnknownCountry(country.0));
    }
    let keep: Vec<NodeId> = g.nodes_of(country).collect();
    Ok(g.induced_subgraph(&keep))
}

/// Turns every altruistic donor into a node that also carries an artificial
/// patient compatible with all donors. Chains `a -> p1 -> .. -> pk` in the
/// input become cycles `a -> p1 -> .. -> pk -> a` whose closing arc has zero
/// weight, so cycle weights still count real transplants only.
///
/// Reduced graphs contain no `AltruisticDonor` nodes, so applying this twice
/// is a no-op.
pub fn reduce_chains_to_cycles(g: &CompatibilityGraph) -> CompatibilityGraph {
    let altruists: Vec<NodeId> = g
        .nodes()
        .iter()
        .filter(|n| n.kind == NodeKind::AltruisticDonor)
        .map(|n| n.id)
        .collect();
    if altruists.is_empty() {
        return g.clone();
    }
    let mut nodes = g.nodes().to_vec();
    for a in &altruists {
        nodes[a.0].kind = NodeKind::ArtificialPatient;
    }
    let mut arcs = g.arcs().to_vec();
    for a in &altruists {
        for v in g.nodes() {
            // altruist-to-altruist dummy arcs would only glue empty chains together
            if v.kind.is_altruist() || g.has_arc(v.id, *a) {
                continue;
            }
            arcs.push(Arc { source: v.id, target: *a, weight: 0.0 });
        }
    }
    CompatibilityGraph::new(nodes, arcs, g.num_countries())
        .expect("chain reduction preserves graph validity")
}
