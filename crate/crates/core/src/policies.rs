//! Matching policies: each country alone, national then joint, or fully
//! joint optimisation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decode::{decode, ExchangePlan};
use crate::enumeration::{enumerate_cycles, enumerate_national_cycles, enumerate_segments, enumerate_segments_of};
use crate::error::{ConfigError, KepError, ModelError, SolverError};
use crate::graph::{country_subgraph, reduce_chains_to_cycles, CompatibilityGraph, CountryId, NodeId};
use crate::model::{
    build_bounded_unbounded_model, build_circulation_model, build_cycle_model, build_edge_model, build_mixed_model,
    IpModel,
};
use crate::policy::{Cap, PolicyConfig};
use crate::solver::{solve, SolveStats, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regime {
    /// Each country matches its own pool.
    Local,
    /// National matching first, then a joint run on what is left.
    Consecutive,
    /// One joint run on the union of all pools.
    Merged,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Local, Regime::Consecutive, Regime::Merged];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Local => "local",
            Regime::Consecutive => "seq",
            Regime::Merged => "merged",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "local" => Ok(Regime::Local),
            "seq" | "consecutive" => Ok(Regime::Consecutive),
            "merged" => Ok(Regime::Merged),
            other => Err(ConfigError::Invalid {
                field: "regime".into(),
                reason: format!("unknown regime '{other}' (expected local, seq or merged)"),
            }),
        }
    }
}

impl Serialize for Regime {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Regime {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which binary program represents a joint run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    Cycle,
    Edge,
    Mixed,
    BoundedUnbounded,
}

impl Formulation {
    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Cycle => "cycle",
            Formulation::Edge => "edge",
            Formulation::Mixed => "mixed",
            Formulation::BoundedUnbounded => "atcz",
        }
    }
}

impl FromStr for Formulation {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "cycle" => Ok(Formulation::Cycle),
            "edge" => Ok(Formulation::Edge),
            "mixed" => Ok(Formulation::Mixed),
            "atcz" | "bounded-unbounded" => Ok(Formulation::BoundedUnbounded),
            other => Err(ConfigError::Invalid {
                field: "model".into(),
                reason: format!("unknown model '{other}' (expected cycle, edge, mixed or atcz)"),
            }),
        }
    }
}

/// The single cycle cap of a policy that imposes nothing else, if any.
fn uniform_cap(policy: &PolicyConfig) -> Option<usize> {
    let k = policy.max_cycle_len()?;
    let plain = policy.countries.iter().all(|c| {
        c.national_cycle_cap == Cap::Finite(k)
            && c.segment_node_cap.allows(k - 1)
            && c.max_segments == Cap::Unbounded
            && c.max_pairs == Cap::Unbounded
    });
    (plain && policy.international_cycle_cap == Cap::Finite(k) && policy.max_countries == Cap::Unbounded).then_some(k)
}

/// The bounded country when exactly one of two countries caps its cycles
/// and the other side imposes no per-cycle limits. With two countries the
/// segments alternate, so one segment of the bounded side per cycle also
/// means one of the other side.
fn bounded_side(g: &CompatibilityGraph, policy: &PolicyConfig) -> Option<CountryId> {
    if g.num_countries() != 2 || policy.num_countries() != 2 {
        return None;
    }
    let finite: Vec<CountryId> =
        g.countries().filter(|&k| policy.country(k).national_cycle_cap.is_finite()).collect();
    let [bounded] = finite[..] else {
        return None;
    };
    let other = policy.country(CountryId(3 - bounded.0));
    let open = other.segment_node_cap == Cap::Unbounded
        && other.max_pairs == Cap::Unbounded
        && policy.max_countries.allows(2);
    let b = policy.country(bounded);
    let one_segment = b.max_segments == Cap::Finite(1)
        && b.segment_node_cap.is_finite()
        && b.max_pairs.allows(b.segment_node_cap.finite().unwrap_or(0));
    (open && one_segment && policy.international_cycle_cap == Cap::Unbounded).then_some(bounded)
}

/// The formulation a joint run uses for this policy.
pub fn choose_formulation(g: &CompatibilityGraph, policy: &PolicyConfig) -> Result<Formulation, ModelError> {
    if policy.all_finite() {
        return Ok(Formulation::Cycle);
    }
    if bounded_side(g, policy).is_some() {
        return Ok(Formulation::BoundedUnbounded);
    }
    let enumerable =
        policy.countries.iter().all(|c| c.national_cycle_cap.is_finite() && c.segment_node_cap.is_finite());
    if enumerable {
        return Ok(Formulation::Mixed);
    }
    Err(ModelError::Unsupported(
        "joint optimisation with unbounded cycles needs either one bounded and one unbounded country \
         limited to one segment per cycle, or finite national and segment caps everywhere"
            .into(),
    ))
}

/// Builds the joint model of `formulation` on `g`. Chain reduction, if
/// wanted, must already have been applied.
pub fn build_model(g: &CompatibilityGraph, policy: &PolicyConfig, formulation: Formulation) -> Result<IpModel, ModelError> {
    policy.validate()?;
    policy.check_countries(g.num_countries())?;
    match formulation {
        Formulation::Cycle => build_cycle_model(&enumerate_cycles(g, policy)?, g.num_nodes()),
        Formulation::Edge => match uniform_cap(policy) {
            Some(k) => build_edge_model(g, k),
            None => Err(ModelError::Unsupported(
                "the edge model needs one finite cycle cap shared by all countries and no other restriction; \
                 use the mixed or atcz model for unbounded caps"
                    .into(),
            )),
        },
        Formulation::Mixed => {
            let mut cycles = Vec::new();
            for k in g.countries() {
                cycles.extend(enumerate_national_cycles(g, policy, k)?);
            }
            build_mixed_model(g, policy, &cycles, &enumerate_segments(g, policy)?)
        }
        Formulation::BoundedUnbounded => {
            let Some(k) = bounded_side(g, policy) else {
                return Err(ModelError::Unsupported(
                    "the atcz model needs two countries, one with a finite and one with an unbounded cycle cap, \
                     and at most one segment of the bounded country per cycle"
                        .into(),
                ));
            };
            let cycles = enumerate_national_cycles(g, policy, k)?;
            let segments = enumerate_segments_of(g, policy, k)?;
            build_bounded_unbounded_model(g, policy, &cycles, &segments)
        }
    }
}

/// Result of one policy run on one pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub plan: ExchangePlan,
    /// Some solve hit its time limit; the plan is the best one found.
    pub timed_out: bool,
    pub stats: Vec<SolveStats>,
}

impl PolicyOutcome {
    fn empty(num_countries: usize) -> Self {
        Self {
            plan: ExchangePlan { transplants: vec![0; num_countries], ..Default::default() },
            timed_out: false,
            stats: Vec::new(),
        }
    }

    fn absorb(&mut self, other: PolicyOutcome) {
        self.plan.merge(other.plan);
        self.timed_out |= other.timed_out;
        self.stats.extend(other.stats);
    }
}

fn solve_model(g: &CompatibilityGraph, model: &IpModel, options: &SolverOptions) -> Result<PolicyOutcome, KepError> {
    let (assignment, stats, timed_out) = match solve(model, options) {
        Ok(sol) => (sol.assignment, vec![sol.stats], false),
        Err(SolverError::TimedOut { incumbent }) => (*incumbent, Vec::new(), true),
        Err(e) => return Err(e.into()),
    };
    let plan = decode(g, model, &assignment)?;
    Ok(PolicyOutcome { plan, timed_out, stats })
}

fn prepare(g: &CompatibilityGraph, policy: &PolicyConfig) -> Result<CompatibilityGraph, KepError> {
    policy.validate()?;
    policy.check_countries(g.num_countries())?;
    Ok(if policy.chains_enabled { reduce_chains_to_cycles(g) } else { g.clone() })
}

/// Every country optimises its own pool under its national cap.
pub fn run_no_cooperation(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    options: &SolverOptions,
) -> Result<PolicyOutcome, KepError> {
    let g = prepare(g, policy)?;
    let mut out = PolicyOutcome::empty(g.num_countries());
    for k in g.countries() {
        match policy.country(k).national_cycle_cap {
            Cap::Finite(_) => {
                let cycles = enumerate_national_cycles(&g, policy, k)?;
                let model = build_cycle_model(&cycles, g.num_nodes())?;
                out.absorb(solve_model(&g, &model, options)?);
            }
            Cap::Unbounded => {
                let sub = country_subgraph(&g, k)?;
                let model = build_circulation_model(&sub.graph);
                let mut part = solve_model(&sub.graph, &model, options)?;
                part.plan = part.plan.map_nodes(|v| sub.to_parent(v));
                out.absorb(part);
            }
        }
    }
    Ok(out)
}

/// One joint optimisation over all pools.
pub fn run_merged(g: &CompatibilityGraph, policy: &PolicyConfig, options: &SolverOptions) -> Result<PolicyOutcome, KepError> {
    let g = prepare(g, policy)?;
    let formulation = choose_formulation(&g, policy)?;
    let model = build_model(&g, policy, formulation)?;
    solve_model(&g, &model, options)
}

/// National optimisation, then a joint run over the unmatched nodes.
pub fn run_consecutive(
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    options: &SolverOptions,
) -> Result<PolicyOutcome, KepError> {
    let g = prepare(g, policy)?;
    let mut out = run_no_cooperation(&g, policy, options)?;
    let mut matched = vec![false; g.num_nodes()];
    for v in out.plan.matched_nodes() {
        matched[v.0] = true;
    }
    let rest: Vec<NodeId> = (0..g.num_nodes()).filter(|&v| !matched[v]).map(NodeId).collect();
    let sub = g.induced_subgraph(&rest);
    let mut joint = run_merged(&sub.graph, policy, options)?;
    joint.plan = joint.plan.map_nodes(|v| sub.to_parent(v));
    out.absorb(joint);
    Ok(out)
}

pub fn run_regime(
    regime: Regime,
    g: &CompatibilityGraph,
    policy: &PolicyConfig,
    options: &SolverOptions,
) -> Result<PolicyOutcome, KepError> {
    match regime {
        Regime::Local => run_no_cooperation(g, policy, options),
        Regime::Consecutive => run_consecutive(g, policy, options),
        Regime::Merged => run_merged(g, policy, options),
    }
}

/// Relative benefit of cooperating: `with / without`, undefined when the
/// baseline matched nobody.
pub fn benefit(with: f64, without: f64) -> Option<f64> {
    (without > 0.0).then(|| with / without)
}
