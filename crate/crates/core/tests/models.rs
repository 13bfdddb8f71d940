mod common;

use std::collections::BTreeSet;

use common::*;
use kep_core::model::{build_edge_model, export_lp_text, parse_lp_text};
use kep_core::policies::{build_model, Formulation};
use kep_core::solver::{solve, SolverOptions};
use kep_core::{decode, Cap, ExchangePlan, PolicyConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every exchange is node-disjoint, uses existing arcs and obeys `p`.
fn check_plan(g: &kep_core::CompatibilityGraph, p: &PolicyConfig, plan: &ExchangePlan) -> Result<(), TestCaseError> {
    let mut seen = BTreeSet::new();
    for c in &plan.cycles {
        for v in c {
            prop_assert!(seen.insert(*v), "node {} used twice", v.0);
        }
        let ids: Vec<usize> = c.iter().map(|v| v.0).collect();
        prop_assert!(oracle_valid(&countries_of(g, &ids), p), "cycle {:?} breaks the policy", ids);
    }
    for (a, b) in plan.arcs() {
        prop_assert!(g.has_arc(a, b));
    }
    prop_assert_eq!(plan.total_transplants(), plan.arcs().len());
    Ok(())
}

/// The same policy with unbounded segment caps replaced by K - 1, which no
/// segment of an international cycle of at most K nodes can exceed.
fn finite_segments(mut p: PolicyConfig) -> PolicyConfig {
    let k = p.international_cycle_cap.finite().unwrap();
    for c in &mut p.countries {
        if c.segment_node_cap == Cap::Unbounded {
            c.segment_node_cap = Cap::Finite(k - 1);
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cycle_model_reaches_the_packing_optimum(seed in any::<u64>(), n in 2usize..=9, density in 0.15f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, density);
        let p = random_finite_policy(&mut rng);
        let model = build_model(&g, &p, Formulation::Cycle).unwrap();
        model.validate().unwrap();
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        prop_assert!(model.is_feasible(&sol.assignment.values));
        let expected = oracle_optimum(&g, &p, p.max_cycle_len().unwrap());
        prop_assert!((sol.assignment.objective - expected).abs() < 1e-9);
        let plan = decode(&g, &model, &sol.assignment).unwrap();
        prop_assert_eq!(plan.total_transplants() as f64, expected);
        check_plan(&g, &p, &plan)?;
    }

    #[test]
    fn edge_and_mixed_models_agree_with_cycles(seed in any::<u64>(), n in 2usize..=8, k in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.35);
        let p = finite_segments(PolicyConfig::uniform(2, Cap::Finite(k)));
        let expected = oracle_optimum(&g, &p, k);
        for model in [build_edge_model(&g, k).unwrap(), build_model(&g, &p, Formulation::Mixed).unwrap()] {
            let sol = solve(&model, &SolverOptions::default()).unwrap();
            prop_assert!((sol.assignment.objective - expected).abs() < 1e-9);
            check_plan(&g, &p, &decode(&g, &model, &sol.assignment).unwrap())?;
        }
    }

    #[test]
    fn bounded_unbounded_model_matches_oracle(seed in any::<u64>(), n in 2usize..=7, k in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.4);
        let p = PolicyConfig::two_country(Cap::Finite(k), Cap::Unbounded);
        let model = build_model(&g, &p, Formulation::BoundedUnbounded).unwrap();
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        let expected = oracle_optimum(&g, &p, n);
        prop_assert!((sol.assignment.objective - expected).abs() < 1e-9);
        let plan = decode(&g, &model, &sol.assignment).unwrap();
        check_plan(&g, &p, &plan)?;
        for s in plan.country_switches(&g) {
            prop_assert!(s == 0 || s == 2);
        }
    }

    #[test]
    fn lp_export_reads_back(seed in any::<u64>(), n in 3usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng, n, 0.4);
        let p = finite_segments(random_finite_policy(&mut rng));
        let model = build_model(&g, &p, Formulation::Mixed).unwrap();
        let summary = parse_lp_text(&export_lp_text(&model)).unwrap();
        prop_assert_eq!(summary.binaries.len(), model.num_vars());
        prop_assert_eq!(summary.constraints.len(), model.constraints.len());
    }
}

#[test]
fn edge_model_rejects_non_uniform_caps() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let g = random_graph(&mut rng, 5, 0.5);
    let p = PolicyConfig::two_country(Cap::Finite(3), Cap::Unbounded);
    let err = build_model(&g, &p, Formulation::Edge).unwrap_err().to_string();
    assert!(err.contains("mixed") && err.contains("atcz"), "{err}");
}

#[test]
fn empty_graph_has_zero_optimum() {
    let g = kep_core::CompatibilityGraph::new(vec![pair_node(0, 1), pair_node(1, 2)], Vec::new(), 2).unwrap();
    let p = finite_segments(PolicyConfig::uniform(2, Cap::Finite(3)));
    for f in [Formulation::Cycle, Formulation::Edge, Formulation::Mixed] {
        let model = build_model(&g, &p, f).unwrap();
        let sol = solve(&model, &SolverOptions::default()).unwrap();
        assert_eq!(sol.assignment.objective, 0.0, "{}", f.as_str());
    }
}
