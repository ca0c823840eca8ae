//! Replay-based plan checking and plan metrics.

use serde::Serialize;

use super::{Plan, Slot};
use crate::spec::{LocIx, ProblemSpec};
use crate::world::{depots, is_goal, Action, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    /// Move along a non-existent path.
    C1,
    /// Agent is not where the action needs it.
    C2,
    /// Move into a location that is not empty.
    C3,
    /// Task given to an agent below the allocation threshold.
    C4,
    /// Some task is never completed.
    C5,
    /// Task completed more than once.
    Duplicate,
    /// Two agents share a location in the same time slot.
    Occupancy,
    /// Derived views disagree with the trace.
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanViolation {
    pub kind: ViolationKind,
    /// Index in the sequential trace, when the violation is tied to a step.
    pub step: Option<usize>,
    pub message: String,
}

fn v(kind: ViolationKind, step: Option<usize>, message: String) -> PlanViolation {
    PlanViolation { kind, step, message }
}

/// Replays the trace from the initial state and checks the parallel
/// schedule. Returns an empty list for a valid plan.
pub fn validate_plan(spec: &ProblemSpec, plan: &Plan) -> Vec<PlanViolation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let mut s = match WorldState::initial(spec) {
        Ok(s) => s,
        Err(e) => return vec![v(Inconsistent, None, e.to_string())],
    };

    for (i, action) in plan.total_order.iter().enumerate() {
        let shown = action.display(spec).to_string();
        match *action {
            Action::Move { agent, from, to } => {
                if !spec.has_path(from, to) {
                    out.push(v(C1, Some(i), format!("{shown}: no path")));
                }
                if s.agent_at(agent) != from {
                    out.push(v(C2, Some(i), format!("{shown}: agent is at {}", spec.location(s.agent_at(agent)).id)));
                }
                if !s.is_empty(to) {
                    out.push(v(C3, Some(i), format!("{shown}: destination not empty")));
                }
            }
            Action::Do { agent, task, loc } => {
                if spec.task(task).location != loc || s.agent_at(agent) != loc {
                    out.push(v(C2, Some(i), format!("{shown}: agent or task not at {}", spec.location(loc).id)));
                }
                if !spec.can_allocate(agent, task) {
                    out.push(v(C4, Some(i), format!("{shown}: success probability below threshold")));
                }
                if s.is_done(task) {
                    out.push(v(Duplicate, Some(i), format!("{shown}: task already done")));
                }
            }
        }
        // keep replaying so later problems are reported too
        s.apply_unchecked(spec, action);
    }
    if !is_goal(spec, &s) {
        let missing: Vec<_> =
            spec.task_indices().filter(|t| !s.is_done(*t)).map(|t| spec.task(t).id.clone()).collect();
        out.push(v(C5, None, format!("tasks never completed: {}", missing.join(", "))));
    }

    // derived views
    for agent in spec.agent_indices() {
        let filtered: Vec<Action> = plan.total_order.iter().filter(|a| a.agent() == agent).copied().collect();
        let lane = plan.per_agent.get(agent.ix()).cloned().unwrap_or_default();
        if filtered != lane {
            out.push(v(Inconsistent, None, format!("per-agent sequence of {} differs from the trace", spec.agent(agent).id)));
        }
        let timed: Vec<Action> = plan
            .timed
            .get(agent.ix())
            .map(|t| t.iter().filter_map(Slot::action).copied().collect())
            .unwrap_or_default();
        if timed != filtered {
            out.push(v(Inconsistent, None, format!("timed schedule of {} differs from the trace", spec.agent(agent).id)));
        }
    }
    out.extend(check_occupancy(spec, plan));
    out
}

/// Walks the parallel schedule slot by slot; no two agents may end a slot
/// on the same non-depot location, and each Move must start where the agent
/// is.
fn check_occupancy(spec: &ProblemSpec, plan: &Plan) -> Vec<PlanViolation> {
    let depots = depots(spec);
    let mut loc: Vec<LocIx> = spec.initial().agent_loc.clone();
    let makespan = plan.timed.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for slot in 0..makespan {
        for (a, lane) in plan.timed.iter().enumerate() {
            if let Some(Slot::Act(Action::Move { to, .. })) = lane.get(slot) {
                loc[a] = *to;
            }
        }
        for (i, li) in loc.iter().enumerate() {
            if depots.contains(li) {
                continue;
            }
            if loc[i + 1..].contains(li) {
                out.push(v(
                    ViolationKind::Occupancy,
                    None,
                    format!("two agents at {} in slot {slot}", spec.location(*li).id),
                ));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanMetrics {
    pub travel_cost: f64,
    /// Action count per agent, in agent order.
    pub horizons: Vec<(String, usize)>,
    /// Length of the parallel schedule.
    pub makespan: usize,
}

pub fn plan_metrics(spec: &ProblemSpec, plan: &Plan) -> PlanMetrics {
    PlanMetrics {
        travel_cost: plan.travel_cost,
        horizons: spec.agent_indices().map(|a| (spec.agent(a).id.clone(), plan.horizon(a))).collect(),
        makespan: plan.timed.iter().map(Vec::len).max().unwrap_or(0),
    }
}
