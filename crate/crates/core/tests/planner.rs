mod common;

use std::collections::BTreeSet;

use hytask::fixtures;
use hytask::planner::{
    export_pddl_domain, export_pddl_problem, ground_initial_actions, heuristic_value, plan_mission, validate_plan,
    vineyard_reference_plan, Heuristic, Plan, PlannerConfig, Slot, ViolationKind,
};
use hytask::spec::ProblemSpec;
use hytask::world::{apply, enabled_actions, Action, WorldState};
use proptest::prelude::*;

fn arb_small() -> impl Strategy<Value = ProblemSpec> {
    (2usize..4, 2usize..4, prop::collection::vec((1usize..16, 0u8..2), 1..4), prop::collection::vec(any::<bool>(), 1..3))
        .prop_map(|(r, c, tasks, agents)| common::grid_spec(r, c, &tasks, &agents, 0.9))
}

/// The spec with its initial configuration moved to `s`.
fn from_state(spec: &ProblemSpec, s: &WorldState) -> ProblemSpec {
    let pending: BTreeSet<_> = spec.task_indices().filter(|t| !s.is_done(*t)).collect();
    spec.with_initial(s.agent_loc.clone(), pending)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn astar_matches_uniform_cost_oracle(spec in arb_small()) {
        let oracle = common::optimal_travel_cost(&spec, 200_000);
        let got = plan_mission(&spec, &PlannerConfig::default());
        match (oracle, got) {
            (Some(best), Ok((plan, _))) => {
                prop_assert!((plan.travel_cost - best).abs() < 1e-9, "astar {} oracle {}", plan.travel_cost, best);
                prop_assert!(validate_plan(&spec, &plan).is_empty());
            }
            (None, Err(_)) => {}
            (o, g) => prop_assert!(false, "oracle {:?} planner {:?}", o, g.map(|p| p.0.travel_cost)),
        }
    }

    /// The max heuristic never overestimates the optimal remaining cost.
    #[test]
    fn max_heuristic_is_admissible(spec in arb_small(), walk in prop::collection::vec(any::<prop::sample::Index>(), 0..6)) {
        let mut s = WorldState::initial(&spec).unwrap();
        for pick in walk {
            let en = enabled_actions(&spec, &s);
            if en.is_empty() { break; }
            s = apply(&spec, &s, &en[pick.index(en.len())]).unwrap();
        }
        let sub = from_state(&spec, &s);
        if let Some(best) = common::optimal_travel_cost(&sub, 200_000) {
            let h = heuristic_value(&spec, &s, Heuristic::Max);
            prop_assert!(h <= best + 1e-9, "h {} > optimum {}", h, best);
        }
    }

    #[test]
    fn greedy_plans_are_valid(spec in arb_small()) {
        if let Ok((plan, _)) = plan_mission(&spec, &PlannerConfig::gbfs()) {
            prop_assert!(validate_plan(&spec, &plan).is_empty());
            prop_assert_eq!(plan.allocation.len(), spec.tasks().len());
            for (t, a) in &plan.allocation {
                prop_assert!(spec.p_success(*a, *t) >= spec.constraints().gamma);
            }
        }
    }

    #[test]
    fn pddl_grounding_matches_enabled_actions(spec in arb_small()) {
        let grounded = ground_initial_actions(&export_pddl_domain(&spec), &export_pddl_problem(&spec)).unwrap();
        let mut ours: Vec<String> = enabled_actions(&spec, &WorldState::initial(&spec).unwrap())
            .iter()
            .map(|a| a.display(&spec).to_string())
            .collect();
        ours.sort();
        prop_assert_eq!(grounded, ours);
    }

    #[test]
    fn plan_documents_round_trip(spec in arb_small()) {
        if let Ok((plan, _)) = plan_mission(&spec, &PlannerConfig::gbfs()) {
            let back = Plan::from_json(&spec, &plan.to_json(&spec)).unwrap();
            prop_assert_eq!(back, plan);
        }
    }
}

#[test]
fn vineyard_optimum_and_reference() {
    let spec = fixtures::vineyard();
    let (plan, _) = plan_mission(&spec, &PlannerConfig::default()).unwrap();
    assert_eq!(plan.travel_cost, 8.0);
    let reference = vineyard_reference_plan(&spec);
    assert_eq!(reference.travel_cost, 8.0);
    assert!(validate_plan(&spec, &reference).is_empty());
    assert_eq!(reference.total_order.len(), 18);
}

#[test]
fn vineyard_pddl_grounding() {
    let spec = fixtures::vineyard();
    let grounded = ground_initial_actions(&export_pddl_domain(&spec), &export_pddl_problem(&spec)).unwrap();
    // every agent starts at l1, which neighbours l2 and l4
    assert_eq!(grounded.len(), 8);
    assert!(grounded.iter().all(|a| a.starts_with("Move(")));
}

#[test]
fn schedule_lanes_replay_the_trace() {
    let spec = fixtures::vineyard();
    let plan = vineyard_reference_plan(&spec);
    for a in spec.agent_indices() {
        let acts: Vec<Action> = plan.timed[a.ix()].iter().filter_map(|s| s.action().copied()).collect();
        assert_eq!(acts, plan.per_agent[a.ix()]);
    }
    // no lane ends in idle time
    assert!(plan.timed.iter().all(|l| !matches!(l.last(), Some(Slot::Wait))));
}

#[test]
fn validator_catches_broken_plans() {
    let spec = fixtures::vineyard();
    let reference = vineyard_reference_plan(&spec);

    let mut dropped = reference.total_order.clone();
    dropped.retain(|a| a.display(&spec).to_string() != "Do(w2, t3l9, l9)");
    let v = validate_plan(&spec, &Plan::from_trace(&spec, dropped));
    assert!(v.iter().any(|v| v.kind == ViolationKind::C5));

    let mut jump = reference.total_order.clone();
    jump[0] = Action::parse(&spec, "Move(w2, l1, l9)").unwrap();
    let v = validate_plan(&spec, &Plan::from_trace(&spec, jump));
    assert!(v.iter().any(|v| v.kind == ViolationKind::C1));

    let mut twice = reference.total_order.clone();
    twice.insert(2, twice[1]);
    let v = validate_plan(&spec, &Plan::from_trace(&spec, twice));
    assert!(!v.is_empty());
}

#[test]
fn timeout_is_reported() {
    let spec = hytask::cli::bench_instance(13, 6, 3).unwrap();
    let cfg = PlannerConfig { timeout: std::time::Duration::from_millis(1), ..PlannerConfig::default() };
    assert!(matches!(plan_mission(&spec, &cfg), Err(hytask::planner::PlanError::Timeout { .. })));
}
