//! Monolithic baseline: the whole mission as one Markov decision process
//! over joint states, with policy-level multi-objective analysis.
//!
//! A joint state holds every agent's location, the empty and done flags,
//! and the failed-attempt counter of every (agent, task) pair attempted so
//! far. Any enabled Move or Do of any agent may fire next. A failed Do
//! bumps its counter; the failure that uses up the last attempt fails the
//! mission. A running state with nothing enabled can only take `stuck`
//! into the failure state.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::pmc::{
    expected_reward, mdp_max_reach_prob, mdp_min_bounded_reward, reach_probability, Choice, Dtmc, Mdp, PmcError,
    SolverOptions, COST, DONE, SUCCESS,
};
use crate::spec::{AgentIx, ProblemSpec, TaskIx};
use crate::world::{enabled_actions, is_goal, Action, WorldError, WorldState};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("state budget exceeded after {reached} states")]
    StateBudgetExceeded { reached: usize },
    #[error("policy enumeration exceeded its limit of {limit} policies")]
    PolicyLimit { limit: usize },
    #[error("Pareto sets exceeded {limit} points in one state")]
    PointLimit { limit: usize },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Pmc(#[from] PmcError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Joint {
    Running { agent_loc: Vec<u16>, empty: u128, done: u128, counters: Vec<(AgentIx, TaskIx, u32)> },
    Success,
    Fail,
}

/// Successor, probability and reward of one outcome.
type Edge = (Joint, f64, f64);

/// The explicit full MDP.
#[derive(Clone, Debug)]
pub struct FullMdp {
    pub mdp: Mdp,
}

impl FullMdp {
    pub fn num_states(&self) -> usize {
        self.mdp.num_states()
    }

    pub fn num_transitions(&self) -> usize {
        self.mdp.num_transitions()
    }
}

/// Builds the reachable joint-state MDP, failing once more than
/// `max_states` states have been discovered.
pub fn build_full_mdp(spec: &ProblemSpec, max_states: usize) -> Result<FullMdp, BaselineError> {
    let init = WorldState::initial(spec)?;
    let start = if is_goal(spec, &init) {
        Joint::Success
    } else {
        Joint::Running {
            agent_loc: init.agent_loc.iter().map(|l| l.0).collect(),
            empty: init.empty,
            done: init.done,
            counters: Vec::new(),
        }
    };
    let mut index: HashMap<Joint, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    index.insert(start, 0);
    let mut choices: Vec<Vec<Choice>> = Vec::new();

    let mut next = 0;
    while next < states.len() {
        let s = states[next].clone();
        next += 1;
        let mut out: Vec<(String, Vec<Edge>)> = Vec::new();
        match &s {
            Joint::Success | Joint::Fail => out.push(("stay".into(), vec![(s.clone(), 1.0, 0.0)])),
            Joint::Running { agent_loc, empty, done, counters } => {
                let ws = WorldState {
                    agent_loc: agent_loc.iter().map(|&l| crate::spec::LocIx(l)).collect(),
                    empty: *empty,
                    done: *done,
                    travel_cost: 0.0,
                };
                let lift = |w: &WorldState, counters: Vec<(AgentIx, TaskIx, u32)>| {
                    if is_goal(spec, w) {
                        Joint::Success
                    } else {
                        Joint::Running {
                            agent_loc: w.agent_loc.iter().map(|l| l.0).collect(),
                            empty: w.empty,
                            done: w.done,
                            counters,
                        }
                    }
                };
                for action in enabled_actions(spec, &ws) {
                    let mut w = ws.clone();
                    w.apply_unchecked(spec, &action);
                    let name = action.display(spec).to_string();
                    match action {
                        Action::Move { from, to, .. } => {
                            let cost = spec.distance(from, to).unwrap_or(1.0);
                            out.push((name, vec![(lift(&w, counters.clone()), 1.0, cost)]));
                        }
                        Action::Do { agent, task, .. } => {
                            let p = spec.p_success(agent, task);
                            let cost = spec.task_cost(agent, task);
                            let failed = counters
                                .iter()
                                .find(|c| c.0 == agent && c.1 == task)
                                .map_or(0, |c| c.2);
                            let mut edges = vec![(lift(&w, counters.clone()), p, cost)];
                            let fail_next = if failed + 1 >= spec.max_retries(agent, task) {
                                Joint::Fail
                            } else {
                                let mut c = counters.clone();
                                match c.iter_mut().find(|c| c.0 == agent && c.1 == task) {
                                    Some(e) => e.2 += 1,
                                    None => {
                                        c.push((agent, task, 1));
                                        c.sort();
                                    }
                                }
                                Joint::Running { agent_loc: agent_loc.clone(), empty: *empty, done: *done, counters: c }
                            };
                            edges.push((fail_next, 1.0 - p, cost));
                            out.push((name, edges));
                        }
                    }
                }
                if out.is_empty() {
                    out.push(("stuck".into(), vec![(Joint::Fail, 1.0, 0.0)]));
                }
            }
        }
        let mut row = Vec::with_capacity(out.len());
        for (action, edges) in out {
            let mut es = Vec::with_capacity(edges.len());
            for (t, p, r) in edges {
                if p <= 0.0 {
                    continue;
                }
                let id = match index.get(&t) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= max_states {
                            return Err(BaselineError::StateBudgetExceeded { reached: states.len() });
                        }
                        states.push(t.clone());
                        index.insert(t, states.len() - 1);
                        states.len() - 1
                    }
                };
                es.push((id, p, r));
            }
            row.push(Choice { action, edges: es });
        }
        choices.push(row);
    }

    let mut labels = BTreeMap::new();
    labels.insert(SUCCESS.to_string(), states.iter().map(|s| *s == Joint::Success).collect());
    labels.insert(DONE.to_string(), states.iter().map(|s| !matches!(s, Joint::Running { .. })).collect());
    Ok(FullMdp { mdp: Mdp { initial: 0, choices, labels } })
}

/// Sizes and query results of the baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub states: usize,
    pub transitions: usize,
    pub choices: usize,
    /// Pmax=? [ F success ]
    pub p_max: f64,
    /// Rmin=? [ C<=k ] with k = `cost_horizon`
    pub r_min_bounded: f64,
    pub cost_horizon: usize,
}

pub fn analyse(full: &FullMdp, cost_horizon: usize) -> Result<BaselineReport, BaselineError> {
    let m = &full.mdp;
    Ok(BaselineReport {
        states: m.num_states(),
        transitions: m.num_transitions(),
        choices: m.num_choices(),
        p_max: mdp_max_reach_prob(m, SUCCESS, &SolverOptions::default())?,
        r_min_bounded: mdp_min_bounded_reward(m, cost_horizon)?,
        cost_horizon,
    })
}

/// A (success probability, expected cost) point of some policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyPoint {
    pub success_prob: f64,
    pub expected_cost: f64,
}

impl PolicyPoint {
    /// At least as good in both objectives.
    pub fn weakly_dominates(&self, other: &PolicyPoint, tol: f64) -> bool {
        self.success_prob >= other.success_prob - tol && self.expected_cost <= other.expected_cost + tol
    }
}

fn strictly_dominated(a: &PolicyPoint, by: &PolicyPoint) -> bool {
    by.success_prob >= a.success_prob
        && by.expected_cost <= a.expected_cost
        && (by.success_prob > a.success_prob || by.expected_cost < a.expected_cost)
}

/// Non-dominated points, by increasing cost, with near-duplicates merged.
fn nondominated(mut pts: Vec<PolicyPoint>) -> Vec<PolicyPoint> {
    pts.sort_by(|a, b| a.expected_cost.total_cmp(&b.expected_cost).then(b.success_prob.total_cmp(&a.success_prob)));
    let mut out: Vec<PolicyPoint> = Vec::new();
    for p in pts {
        match out.last() {
            Some(last) if last.success_prob >= p.success_prob - 1e-12 => {}
            _ => out.push(p),
        }
    }
    out
}

/// Literal enumeration of deterministic memoryless policies: choices are
/// fixed only in states the policy reaches, each induced chain is solved
/// exactly, and the Pareto front of the finite-cost points is returned.
pub fn enumerate_policies(full: &FullMdp, limit: usize) -> Result<Vec<PolicyPoint>, BaselineError> {
    let m = &full.mdp;
    m.check()?;
    let mut choice: Vec<Option<usize>> = vec![None; m.num_states()];
    let mut points = Vec::new();
    let mut count = 0usize;
    enumerate_rec(m, &mut choice, &mut points, &mut count, limit)?;
    Ok(nondominated(points))
}

fn enumerate_rec(
    m: &Mdp,
    choice: &mut Vec<Option<usize>>,
    points: &mut Vec<PolicyPoint>,
    count: &mut usize,
    limit: usize,
) -> Result<(), BaselineError> {
    // first policy-reachable state without a choice yet
    let mut seen = vec![false; m.num_states()];
    let mut stack = vec![m.initial];
    seen[m.initial] = true;
    let mut open = None;
    while let Some(s) = stack.pop() {
        match choice[s] {
            None if m.choices[s].len() > 1 => {
                open = Some(open.map_or(s, |o: usize| o.min(s)));
            }
            _ => {
                let c = &m.choices[s][choice[s].unwrap_or(0)];
                for &(t, _, _) in &c.edges {
                    if !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
    }
    match open {
        Some(s) => {
            for k in 0..m.choices[s].len() {
                choice[s] = Some(k);
                enumerate_rec(m, choice, points, count, limit)?;
            }
            choice[s] = None;
            Ok(())
        }
        None => {
            *count += 1;
            if *count > limit {
                return Err(BaselineError::PolicyLimit { limit });
            }
            let d = induced_chain(m, choice);
            let p = reach_probability(&d, SUCCESS)?;
            match expected_reward(&d, COST, DONE) {
                Ok(c) => points.push(PolicyPoint { success_prob: p, expected_cost: c }),
                Err(PmcError::InfiniteReward { .. }) => {}
                Err(e) => return Err(e.into()),
            }
            Ok(())
        }
    }
}

fn induced_chain(m: &Mdp, choice: &[Option<usize>]) -> Dtmc {
    let mut rows = Vec::with_capacity(m.num_states());
    let mut rewards = Vec::with_capacity(m.num_states());
    for (s, cs) in m.choices.iter().enumerate() {
        let c = &cs[choice[s].unwrap_or(0)];
        rows.push(c.edges.iter().map(|&(t, p, _)| (t, p)).collect());
        rewards.push(c.edges.iter().map(|e| e.2).collect());
    }
    let mut d = Dtmc::new(m.initial, rows);
    for (name, l) in &m.labels {
        d.add_label(name, l.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i));
    }
    d.rewards.insert(COST.to_string(), rewards);
    d
}

/// Pareto front of deterministic policies by Pareto-set value iteration.
///
/// Every state starts with no achievable point except the absorbing ones
/// ((1, 0) on success, (0, 0) on failure); each sweep replaces a state's set
/// with the non-dominated union, over its actions, of the
/// probability-weighted Minkowski sums of its successors' sets. Points thus
/// belong to policies that reach an absorbing state surely. Policies may
/// choose differently on different visits to a state, so the front weakly
/// dominates the front of [`enumerate_policies`] and equals it when no
/// state is reachable along two histories.
pub fn pareto_policies(full: &FullMdp, point_limit: usize) -> Result<Vec<PolicyPoint>, BaselineError> {
    let m = &full.mdp;
    m.check()?;
    let success = m.label(SUCCESS)?;
    let done = m.label(DONE)?;
    let n = m.num_states();
    let mut sets: Vec<Vec<PolicyPoint>> = (0..n)
        .map(|s| {
            if success[s] {
                vec![PolicyPoint { success_prob: 1.0, expected_cost: 0.0 }]
            } else if done[s] {
                vec![PolicyPoint { success_prob: 0.0, expected_cost: 0.0 }]
            } else {
                Vec::new()
            }
        })
        .collect();
    for _ in 0..=n {
        let mut changed = false;
        for s in (0..n).rev() {
            if done[s] {
                continue;
            }
            let mut cand = Vec::new();
            'choices: for c in &m.choices[s] {
                let mut acc = vec![PolicyPoint { success_prob: 0.0, expected_cost: 0.0 }];
                for &(t, p, r) in &c.edges {
                    if sets[t].is_empty() {
                        continue 'choices;
                    }
                    let mut sum = Vec::with_capacity(acc.len() * sets[t].len());
                    for a in &acc {
                        for b in &sets[t] {
                            sum.push(PolicyPoint {
                                success_prob: a.success_prob + p * b.success_prob,
                                expected_cost: a.expected_cost + p * (r + b.expected_cost),
                            });
                        }
                    }
                    acc = nondominated(sum);
                    if acc.len() > point_limit {
                        return Err(BaselineError::PointLimit { limit: point_limit });
                    }
                }
                cand.extend(acc);
            }
            let new = nondominated(cand);
            if new.len() > point_limit {
                return Err(BaselineError::PointLimit { limit: point_limit });
            }
            if !same_front(&new, &sets[s]) {
                sets[s] = new;
                changed = true;
            }
        }
        if !changed {
            return Ok(sets[m.initial].clone());
        }
    }
    Err(PmcError::NoConvergence { sweeps: n + 1 }.into())
}

fn same_front(a: &[PolicyPoint], b: &[PolicyPoint]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            (x.success_prob - y.success_prob).abs() <= 1e-12 && (x.expected_cost - y.expected_cost).abs() <= 1e-9
        })
}

/// Drops points that some other point strictly dominates.
pub fn pareto_filter(pts: &[PolicyPoint]) -> Vec<PolicyPoint> {
    pts.iter().filter(|p| !pts.iter().any(|q| strictly_dominated(p, q))).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::spec::parse_problem_spec;

    fn one_task(retries: u32) -> ProblemSpec {
        let text = format!(
            r#"{{
            "locations": [{{"id": "l1"}}, {{"id": "l2"}}],
            "paths": [{{"start": "l1", "end": "l2", "distance": 1}}],
            "tasks": [{{"id": "t", "instances": [{{"id": "tl2", "location": "l2"}}]}}],
            "agents": [
              {{"id": "w", "type": "worker", "tasks": [{{"id": "t", "cost": 5, "p_success": 0.9, "retries": {retries}}}]}}
            ],
            "constraints": {{"mission_probability_of_success": 0.5, "min_assignment_probability": 0.5}}
          }}"#
        );
        parse_problem_spec(&text).unwrap()
    }

    #[test]
    fn single_agent_retry_semantics() {
        for (k, expect) in [(1u32, 0.9), (2, 0.99), (3, 0.999)] {
            let full = build_full_mdp(&one_task(k), 10_000).unwrap();
            let r = analyse(&full, 20).unwrap();
            assert!((r.p_max - expect).abs() < 1e-12, "k={k}: {}", r.p_max);
        }
    }

    #[test]
    fn bounded_cost_is_the_direct_route() {
        // move (1) + one attempt (5) + .1 * 5 for the retry
        let full = build_full_mdp(&one_task(2), 10_000).unwrap();
        let r = analyse(&full, 20).unwrap();
        assert!((r.r_min_bounded - 6.5).abs() < 1e-12);
    }

    #[test]
    fn budget_exceeded_is_reported() {
        let spec = fixtures::vineyard();
        match build_full_mdp(&spec, 500) {
            Err(BaselineError::StateBudgetExceeded { reached }) => assert_eq!(reached, 500),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_tasks_single_success_state() {
        let spec = fixtures::vineyard();
        let spec = spec.with_initial(spec.initial().agent_loc.clone(), Default::default());
        let full = build_full_mdp(&spec, 10).unwrap();
        assert_eq!(full.num_states(), 1);
        let r = analyse(&full, 20).unwrap();
        assert_eq!(r.p_max, 1.0);
        assert_eq!(r.r_min_bounded, 0.0);
    }

    #[test]
    fn enumeration_and_value_iteration_agree_on_tree() {
        let full = build_full_mdp(&one_task(3), 10_000).unwrap();
        let a = enumerate_policies(&full, 10_000).unwrap();
        let b = pareto_policies(&full, 1000).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.success_prob - y.success_prob).abs() < 1e-9);
            assert!((x.expected_cost - y.expected_cost).abs() < 1e-9);
        }
    }

    #[test]
    fn policy_limit_enforced() {
        let spec = fixtures::m1_analogue();
        let full = build_full_mdp(&spec, 1_000_000).unwrap();
        assert!(matches!(enumerate_policies(&full, 5), Err(BaselineError::PolicyLimit { limit: 5 })));
    }
}
