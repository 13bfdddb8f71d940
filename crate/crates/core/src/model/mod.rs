//! Solver-independent binary programs.
//!
//! Every model maximises a linear objective over binary variables. Each
//! variable records what it stands for (a cycle, a segment, an arc in some
//! role, a layer copy of an arc, ...) so that solutions can be decoded back
//! into exchanges, and every constraint carries a tag naming the family it
//! belongs to.

mod bounded;
mod cycle;
mod edge;
mod lp;
mod mixed;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub use bounded::build_bounded_unbounded_model;
pub use cycle::build_cycle_model;
pub use edge::{build_circulation_model, build_edge_model};
pub use lp::{export_lp_text, parse_lp_text, LpConstraint, LpSummary};
pub use mixed::{add_layer_constraints, build_mixed_model, default_layer_count, layers_needed};

use crate::enumeration::{Cycle, Segment};
use crate::error::ModelError;
use crate::graph::{CountryId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// What a binary variable represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Selects `IpModel::cycles[i]`.
    Cycle(usize),
    /// Selects `IpModel::segments[i]`.
    Segment(usize),
    /// Arc used by any exchange.
    Edge { source: NodeId, target: NodeId },
    /// Arc used inside a national cycle.
    NationalEdge { source: NodeId, target: NodeId },
    /// Arc used inside an international cycle.
    InternationalEdge { source: NodeId, target: NodeId },
    /// Copy of an arc in layer `layer` (1-based).
    LayerEdge { layer: usize, source: NodeId, target: NodeId },
    /// Country takes part in the international cycle(s) of a layer.
    CountryLayer { country: CountryId, layer: usize },
    /// Node receives through an international arc.
    InIndicator(NodeId),
    /// Node gives through an international arc.
    OutIndicator(NodeId),
}

impl VarKind {
    /// Arc carried by edge-type variables (not layer copies).
    pub fn arc(&self) -> Option<(NodeId, NodeId)> {
        match *self {
            VarKind::Edge { source, target }
            | VarKind::NationalEdge { source, target }
            | VarKind::InternationalEdge { source, target } => Some((source, target)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }
}

/// Constraint families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintTag {
    /// In-flow equals out-flow at a node.
    FlowConservation,
    /// A donor gives at most once.
    OutDegree,
    /// No selected path of `K` arcs, which rules out cycles longer than `K`.
    PathLength,
    /// A node is in at most one selected cycle.
    NodePacking,
    /// A node may give only if a selected national cycle or segment covers it.
    CoverLink,
    /// A node is covered by at most one national cycle or segment.
    CoverPacking,
    /// A selected national cycle uses all of its arcs.
    CycleUsesArcs,
    /// A national cycle whose arcs are all used is selected.
    CycleSelectedByArcs,
    /// A selected segment uses its arcs and is entered and left internationally.
    SegmentUsesArcs,
    /// A fully used segment is selected.
    SegmentSelectedByArcs,
    NationalConservation,
    InternationalConservation,
    /// International cycles respect the international cycle cap.
    InternationalPathLength,
    /// National cycles respect the national cap.
    NationalPathLength,
    /// Segments respect the segment cap.
    SegmentPathLength,
    /// Defines the international-receive indicator of a node.
    InIndicatorDef,
    /// Defines the international-give indicator of a node.
    OutIndicatorDef,
    /// An arc's layer copies add up to the arc variable.
    LayerSplit,
    LayerConservation,
    /// Segments per country per layer.
    LayerSegmentCap,
    /// Pairs per country per layer.
    LayerPairCap,
    /// A country receiving in a layer is marked as participating.
    CountryActivation,
    /// Countries per layer.
    CountryCap,
    /// International arcs into a bounded-country node match segments starting there.
    SegmentStart,
    /// International arcs out of a bounded-country node match segments ending there.
    SegmentEnd,
    /// A segment is entered and left in the layer of its last node.
    LayerPinning,
}

impl ConstraintTag {
    pub const ALL: [ConstraintTag; 26] = [
        ConstraintTag::FlowConservation,
        ConstraintTag::OutDegree,
        ConstraintTag::PathLength,
        ConstraintTag::NodePacking,
        ConstraintTag::CoverLink,
        ConstraintTag::CoverPacking,
        ConstraintTag::CycleUsesArcs,
        ConstraintTag::CycleSelectedByArcs,
        ConstraintTag::SegmentUsesArcs,
        ConstraintTag::SegmentSelectedByArcs,
        ConstraintTag::NationalConservation,
        ConstraintTag::InternationalConservation,
        ConstraintTag::InternationalPathLength,
        ConstraintTag::NationalPathLength,
        ConstraintTag::SegmentPathLength,
        ConstraintTag::InIndicatorDef,
        ConstraintTag::OutIndicatorDef,
        ConstraintTag::LayerSplit,
        ConstraintTag::LayerConservation,
        ConstraintTag::LayerSegmentCap,
        ConstraintTag::LayerPairCap,
        ConstraintTag::CountryActivation,
        ConstraintTag::CountryCap,
        ConstraintTag::SegmentStart,
        ConstraintTag::SegmentEnd,
        ConstraintTag::LayerPinning,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintTag::FlowConservation => "flow_conservation",
            ConstraintTag::OutDegree => "out_degree",
            ConstraintTag::PathLength => "path_length",
            ConstraintTag::NodePacking => "node_packing",
            ConstraintTag::CoverLink => "cover_link",
            ConstraintTag::CoverPacking => "cover_packing",
            ConstraintTag::CycleUsesArcs => "cycle_uses_arcs",
            ConstraintTag::CycleSelectedByArcs => "cycle_selected_by_arcs",
            ConstraintTag::SegmentUsesArcs => "segment_uses_arcs",
            ConstraintTag::SegmentSelectedByArcs => "segment_selected_by_arcs",
            ConstraintTag::NationalConservation => "national_conservation",
            ConstraintTag::InternationalConservation => "international_conservation",
            ConstraintTag::InternationalPathLength => "international_path_length",
            ConstraintTag::NationalPathLength => "national_path_length",
            ConstraintTag::SegmentPathLength => "segment_path_length",
            ConstraintTag::InIndicatorDef => "in_indicator",
            ConstraintTag::OutIndicatorDef => "out_indicator",
            ConstraintTag::LayerSplit => "layer_split",
            ConstraintTag::LayerConservation => "layer_conservation",
            ConstraintTag::LayerSegmentCap => "layer_segment_cap",
            ConstraintTag::LayerPairCap => "layer_pair_cap",
            ConstraintTag::CountryActivation => "country_activation",
            ConstraintTag::CountryCap => "country_cap",
            ConstraintTag::SegmentStart => "segment_start",
            ConstraintTag::SegmentEnd => "segment_end",
            ConstraintTag::LayerPinning => "layer_pinning",
        }
    }

    /// Path-length families can be huge and rarely bind; the solver adds
    /// them to its relaxation only when violated.
    pub fn is_lazy(self) -> bool {
        matches!(
            self,
            ConstraintTag::PathLength
                | ConstraintTag::InternationalPathLength
                | ConstraintTag::NationalPathLength
                | ConstraintTag::SegmentPathLength
        )
    }
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
    pub tag: ConstraintTag,
}

impl LinearConstraint {
    pub fn lhs(&self, values: &[bool]) -> f64 {
        self.terms.iter().filter(|(v, _)| values[v.0]).map(|(_, c)| c).sum()
    }

    pub fn satisfied_by(&self, values: &[bool]) -> bool {
        self.relation.holds(self.lhs(values), self.rhs, 1e-9)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IpModel {
    pub variables: Vec<VarKind>,
    pub constraints: Vec<LinearConstraint>,
    /// Maximised.
    pub objective: Vec<(VarId, f64)>,
    pub cycles: Vec<Cycle>,
    pub segments: Vec<Segment>,
    /// Configuration warnings raised while building.
    pub notes: Vec<String>,
}

impl IpModel {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_name(&self, var: VarId) -> String {
        match self.variables[var.0] {
            VarKind::Cycle(i) => format!("x_c{i}"),
            VarKind::Segment(i) => format!("z_s{i}"),
            VarKind::Edge { source, target } => format!("y_{source}_{target}"),
            VarKind::NationalEdge { source, target } => format!("yn_{source}_{target}"),
            VarKind::InternationalEdge { source, target } => format!("yi_{source}_{target}"),
            VarKind::LayerEdge { layer, source, target } => format!("yt{layer}_{source}_{target}"),
            VarKind::CountryLayer { country, layer } => format!("b{country}_{layer}"),
            VarKind::InIndicator(n) => format!("ep{n}"),
            VarKind::OutIndicator(n) => format!("em{n}"),
        }
    }

    pub fn objective_value(&self, values: &[bool]) -> f64 {
        self.objective.iter().filter(|(v, _)| values[v.0]).map(|(_, c)| c).sum()
    }

    pub fn is_feasible(&self, values: &[bool]) -> bool {
        values.len() == self.variables.len() && self.constraints.iter().all(|c| c.satisfied_by(values))
    }

    pub fn tag_histogram(&self) -> BTreeMap<ConstraintTag, usize> {
        let mut hist = BTreeMap::new();
        for c in &self.constraints {
            *hist.entry(c.tag).or_insert(0) += 1;
        }
        hist
    }

    /// Structural lint: every referenced variable is declared, no constraint
    /// is empty or repeats a variable, and coefficients are finite.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.variables.len();
        let check_terms = |terms: &[(VarId, f64)], what: &str| -> Result<(), ModelError> {
            let mut seen = vec![false; n];
            for (v, c) in terms {
                if v.0 >= n {
                    return Err(ModelError::Invalid(format!("{what} references undeclared variable {}", v.0)));
                }
                if std::mem::replace(&mut seen[v.0], true) {
                    return Err(ModelError::Invalid(format!("{what} repeats variable {}", self.var_name(*v))));
                }
                if !c.is_finite() {
                    return Err(ModelError::Invalid(format!("{what} has a non-finite coefficient")));
                }
            }
            Ok(())
        };
        check_terms(&self.objective, "objective")?;
        for (i, c) in self.constraints.iter().enumerate() {
            let what = format!("constraint {i} ({})", c.tag);
            if c.terms.is_empty() {
                return Err(ModelError::Invalid(format!("{what} has no terms")));
            }
            if !c.rhs.is_finite() {
                return Err(ModelError::Invalid(format!("{what} has a non-finite right-hand side")));
            }
            check_terms(&c.terms, &what)?;
        }
        for (i, kind) in self.variables.iter().enumerate() {
            match *kind {
                VarKind::Cycle(c) if c >= self.cycles.len() => {
                    return Err(ModelError::Invalid(format!("variable {i} points at missing cycle {c}")));
                }
                VarKind::Segment(s) if s >= self.segments.len() => {
                    return Err(ModelError::Invalid(format!("variable {i} points at missing segment {s}")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// One line per constraint: name, tag description and the expression.
    pub fn explain(&self) -> String {
        let mut out = String::new();
        let mut counters: HashMap<ConstraintTag, usize> = HashMap::new();
        for c in &self.constraints {
            let k = counters.entry(c.tag).or_insert(0);
            let expr: Vec<String> = c.terms.iter().map(|(v, a)| format!("{a:+} {}", self.var_name(*v))).collect();
            out.push_str(&format!(
                "{}_{}\t[{}]\t{} {} {}\n",
                c.tag.name(),
                k,
                c.tag.name(),
                expr.join(" "),
                c.relation.symbol(),
                c.rhs
            ));
            *k += 1;
        }
        for note in &self.notes {
            out.push_str(&format!("note\t{note}\n"));
        }
        out
    }
}

/// Incremental model construction with variable de-duplication.
#[derive(Debug, Default)]
pub(crate) struct ModelBuilder {
    model: IpModel,
    index: HashMap<VarKind, VarId>,
}

impl ModelBuilder {
    pub fn from_model(model: IpModel) -> Self {
        let index = model.variables.iter().enumerate().map(|(i, k)| (*k, VarId(i))).collect();
        Self { model, index }
    }

    pub fn var(&mut self, kind: VarKind) -> VarId {
        if let Some(&v) = self.index.get(&kind) {
            return v;
        }
        let v = VarId(self.model.variables.len());
        self.model.variables.push(kind);
        self.index.insert(kind, v);
        v
    }

    pub fn get(&self, kind: VarKind) -> Option<VarId> {
        self.index.get(&kind).copied()
    }

    pub fn add_cycle(&mut self, cycle: Cycle) -> VarId {
        self.model.cycles.push(cycle);
        self.var(VarKind::Cycle(self.model.cycles.len() - 1))
    }

    pub fn add_segment(&mut self, segment: Segment) -> VarId {
        self.model.segments.push(segment);
        self.var(VarKind::Segment(self.model.segments.len() - 1))
    }

    pub fn objective(&mut self, var: VarId, coef: f64) {
        if let Some(t) = self.model.objective.iter_mut().find(|(v, _)| *v == var) {
            t.1 += coef;
        } else {
            self.model.objective.push((var, coef));
        }
    }

    /// Adds a constraint after merging repeated variables and dropping zero
    /// coefficients. Returns false when nothing remains; such a constraint
    /// reads `0 rel rhs` and must then hold trivially.
    pub fn constrain(
        &mut self,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
        tag: ConstraintTag,
    ) -> bool {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, c) in terms {
            if let Some(t) = merged.iter_mut().find(|(w, _)| *w == v) {
                t.1 += c;
            } else {
                merged.push((v, c));
            }
        }
        merged.retain(|(_, c)| *c != 0.0);
        if merged.is_empty() {
            debug_assert!(relation.holds(0.0, rhs, 1e-9), "empty {tag} constraint is infeasible");
            return false;
        }
        self.model.constraints.push(LinearConstraint { terms: merged, relation, rhs, tag });
        true
    }

    pub fn note(&mut self, note: String) {
        self.model.notes.push(note);
    }

    pub fn finish(self) -> IpModel {
        self.model
    }
}
