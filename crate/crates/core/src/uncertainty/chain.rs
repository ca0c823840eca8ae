//! Explicit per-agent chains for a concrete retry assignment.
//!
//! A chain state is `(c, x)`: `c` counts completed actions (`n_act` is
//! success, `n_act + 1` is failure) and `x` the failed attempts of the
//! current task. Only reachable states are built and zero-probability
//! edges are dropped, so the state count depends on the probabilities as
//! well as on the budgets.

use std::collections::HashMap;

use super::{AgentChain, ExhaustCost, ModelError, ParametricPlanModel, RetryAssignment, Step};
use crate::pmc::{Dtmc, COST, DONE, SUCCESS};

/// One DTMC per chain of the model.
pub fn instantiate(model: &ParametricPlanModel, a: &RetryAssignment) -> Result<Vec<Dtmc>, ModelError> {
    model.check(a)?;
    Ok(model.chains.iter().map(|c| instantiate_chain(model, c, a)).collect())
}

pub fn instantiate_chain(model: &ParametricPlanModel, chain: &AgentChain, a: &RetryAssignment) -> Dtmc {
    let n = chain.n_act();
    let entry_x = |c: usize| -> u32 {
        match chain.steps.get(c) {
            Some(Step::Do { slot: Some(s), .. }) => model.slots[*s].consumed,
            _ => 0,
        }
    };
    let fail = (n + 1, 0u32);
    let mut index: HashMap<(usize, u32), usize> = HashMap::new();
    let mut states = vec![(0usize, entry_x(0))];
    index.insert(states[0], 0);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rewards: Vec<Vec<f64>> = Vec::new();

    let mut next = 0;
    while next < states.len() {
        let (c, x) = states[next];
        next += 1;
        // (successor, probability, reward)
        let mut out: Vec<((usize, u32), f64, f64)> = Vec::with_capacity(2);
        if c >= n {
            out.push(((c, x), 1.0, 0.0));
        } else {
            let advance = (c + 1, entry_x(c + 1));
            match chain.steps[c] {
                Step::Move { cost, .. } => out.push((advance, 1.0, cost)),
                Step::Do { p, cost, slot: None, .. } => {
                    out.push((advance, p, cost));
                    out.push((fail, 1.0 - p, cost));
                }
                Step::Do { p, cost, slot: Some(s), .. } => {
                    if x < a.0[s] {
                        out.push((advance, p, cost));
                        out.push(((c, x + 1), 1.0 - p, cost));
                    } else {
                        let r = match model.exhaust {
                            ExhaustCost::Zero => 0.0,
                            ExhaustCost::Charge => cost,
                        };
                        out.push((fail, 1.0, r));
                    }
                }
            }
        }
        let mut row = Vec::with_capacity(out.len());
        let mut rew = Vec::with_capacity(out.len());
        for (st, p, r) in out {
            if p <= 0.0 {
                continue;
            }
            let id = *index.entry(st).or_insert_with(|| {
                states.push(st);
                states.len() - 1
            });
            row.push((id, p));
            rew.push(r);
        }
        rows.push(row);
        rewards.push(rew);
    }

    let mut d = Dtmc::new(0, rows);
    let success: Vec<usize> = states.iter().enumerate().filter(|(_, s)| s.0 == n).map(|(i, _)| i).collect();
    let done: Vec<usize> = states.iter().enumerate().filter(|(_, s)| s.0 >= n).map(|(i, _)| i).collect();
    d.add_label(SUCCESS, success);
    d.add_label(DONE, done);
    d.rewards.insert(COST.to_string(), rewards);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planner::{vineyard_reference_plan, Plan};
    use crate::pmc::{chain_metrics, factored_metrics};
    use crate::uncertainty::{build_parametric_model, evaluate, BuildOptions};
    use crate::world::parse_actions;

    fn single_task(trace: &str, budget: u32) -> (f64, f64) {
        let spec = fixtures::vineyard();
        let plan = Plan::from_trace(&spec, parse_actions(&spec, trace).unwrap());
        let model = build_parametric_model(&spec, &plan).unwrap();
        let mut a = model.minimal_assignment();
        a.0[0] = budget;
        let m = evaluate(&model, &a).unwrap();
        (m.success_prob, m.expected_cost)
    }

    #[test]
    fn robot_identify_budgets() {
        let (p1, _) = single_task("Move(r1, l1, l4)\nDo(r1, t3l4, l4)", 1);
        assert!((p1 - 0.97).abs() < 1e-12);
        let (p2, _) = single_task("Move(r1, l1, l4)\nDo(r1, t3l4, l4)", 2);
        assert!((p2 - 0.9991).abs() < 1e-12);
    }

    #[test]
    fn worker_expected_cost_two_attempts() {
        let (_, cost) = single_task("Move(w2, l1, l4)\nDo(w2, t3l4, l4)", 2);
        // the move, then 5 for the first attempt and 5 more with prob .01
        assert!((cost - 6.05).abs() < 1e-12);
    }

    #[test]
    fn rows_are_distributions() {
        let spec = fixtures::vineyard();
        let model = build_parametric_model(&spec, &vineyard_reference_plan(&spec)).unwrap();
        let a = crate::uncertainty::RetryAssignment(model.slots.iter().map(|s| s.hi).collect());
        for d in instantiate(&model, &a).unwrap() {
            d.check().unwrap();
        }
    }

    #[test]
    fn reference_metrics_all_ones() {
        let spec = fixtures::vineyard();
        let model = build_parametric_model(&spec, &vineyard_reference_plan(&spec)).unwrap();
        let chains = instantiate(&model, &model.minimal_assignment()).unwrap();
        let w2 = chain_metrics(&chains[model.chains.iter().position(|c| c.agent_id == "w2").unwrap()]).unwrap();
        assert!((w2.expected_cost - 31.562793).abs() < 1e-9);
        let m = factored_metrics(&chains).unwrap();
        assert!((m.success_prob - 0.941480149401).abs() < 1e-9);
        assert!((m.expected_cost - 37.522893).abs() < 1e-9);
    }

    #[test]
    fn charged_exhaustion_costs_more() {
        let spec = fixtures::vineyard();
        let plan = vineyard_reference_plan(&spec);
        let zero = build_parametric_model(&spec, &plan).unwrap();
        let charge = crate::uncertainty::build_parametric_model_with(
            &spec,
            &plan,
            &BuildOptions { exhaust: ExhaustCost::Charge, ..Default::default() },
        )
        .unwrap();
        let a = zero.minimal_assignment();
        let (z, c) = (evaluate(&zero, &a).unwrap(), evaluate(&charge, &a).unwrap());
        assert_eq!(z.success_prob, c.success_prob);
        assert!(c.expected_cost > z.expected_cost);
    }
}
