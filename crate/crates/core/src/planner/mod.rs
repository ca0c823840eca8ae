//! Travel-optimal mission planning, plan validation and PDDL export.

mod pddl;
mod schedule;
mod search;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::spec::{AgentIx, ProblemSpec, TaskIx};
use crate::world::{parse_actions, Action, WorldError};

pub use pddl::{export_pddl_domain, export_pddl_problem, ground_initial_actions, PddlError};
pub use schedule::{timed_schedule, Slot};
pub use search::{heuristic_value, plan_mission, Heuristic, PlannerConfig, SearchStats, Strategy};
pub use validate::{plan_metrics, validate_plan, PlanMetrics, PlanViolation, ViolationKind};

#[derive(Debug, thiserror::Error)]
pub enum PlanError {
    #[error("no plan exists: the goal is unreachable from the initial state")]
    NoPlanExists,
    #[error("planner timed out after {expanded} expansions")]
    Timeout { expanded: usize },
    #[error("planner exceeded its node limit of {limit}")]
    NodeLimit { limit: usize },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("malformed plan document: {0}")]
    Document(String),
}

/// A mission plan: the planner's sequential trace plus the views derived
/// from it.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub total_order: Vec<Action>,
    /// Agent-filtered subsequences of `total_order`, indexed by agent.
    pub per_agent: Vec<Vec<Action>>,
    /// Parallel schedule, one slot per time unit, indexed by agent.
    pub timed: Vec<Vec<Slot>>,
    pub travel_cost: f64,
    pub allocation: BTreeMap<TaskIx, AgentIx>,
}

impl Plan {
    /// Derives every view from a sequential trace. The trace is not checked;
    /// use [`validate_plan`] for that.
    pub fn from_trace(spec: &ProblemSpec, trace: Vec<Action>) -> Plan {
        let mut per_agent = vec![Vec::new(); spec.agents().len()];
        let mut allocation = BTreeMap::new();
        let mut travel_cost = 0.0;
        for a in &trace {
            per_agent[a.agent().ix()].push(*a);
            match *a {
                Action::Move { from, to, .. } => travel_cost += spec.distance(from, to).unwrap_or(0.0),
                Action::Do { agent, task, .. } => {
                    allocation.insert(task, agent);
                }
            }
        }
        let timed = timed_schedule(spec, &trace);
        Plan { total_order: trace, per_agent, timed, travel_cost, allocation }
    }

    /// Number of actions of one agent (its horizon).
    pub fn horizon(&self, a: AgentIx) -> usize {
        self.per_agent[a.ix()].len()
    }

    pub fn to_document(&self, spec: &ProblemSpec) -> PlanDocument {
        let show = |a: &Action| a.display(spec).to_string();
        let mut per_agent = BTreeMap::new();
        let mut timed = BTreeMap::new();
        for agent in spec.agent_indices() {
            let acts = &self.per_agent[agent.ix()];
            if acts.is_empty() {
                continue;
            }
            let id = spec.agent(agent).id.clone();
            per_agent.insert(id.clone(), acts.iter().map(show).collect());
            timed.insert(
                id,
                self.timed[agent.ix()]
                    .iter()
                    .map(|s| match s {
                        Slot::Act(a) => show(a),
                        Slot::Wait => "Wait".to_string(),
                    })
                    .collect(),
            );
        }
        PlanDocument {
            actions: self.total_order.iter().map(show).collect(),
            travel_cost: self.travel_cost,
            per_agent,
            timed,
            allocation: self
                .allocation
                .iter()
                .map(|(t, a)| (spec.task(*t).id.clone(), spec.agent(*a).id.clone()))
                .collect(),
        }
    }

    pub fn to_json(&self, spec: &ProblemSpec) -> String {
        serde_json::to_string_pretty(&self.to_document(spec)).expect("plan documents always serialize")
    }

    /// Rebuilds a plan from its document; only the action list is read, the
    /// other views are recomputed.
    pub fn from_json(spec: &ProblemSpec, text: &str) -> Result<Plan, PlanError> {
        let doc: PlanDocument = serde_json::from_str(text).map_err(|e| PlanError::Document(e.to_string()))?;
        let trace = parse_actions(spec, &doc.actions.join("\n"))?;
        Ok(Plan::from_trace(spec, trace))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDocument {
    pub actions: Vec<String>,
    pub travel_cost: f64,
    #[serde(default)]
    pub per_agent: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub timed: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub allocation: BTreeMap<String, String>,
}

/// The 18-action reference plan on the bundled vineyard.
pub fn vineyard_reference_plan(spec: &ProblemSpec) -> Plan {
    let trace = parse_actions(spec, crate::fixtures::VINEYARD_REFERENCE_PLAN).expect("reference plan parses");
    Plan::from_trace(spec, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn reference_plan_views() {
        let spec = fixtures::vineyard();
        let plan = vineyard_reference_plan(&spec);
        let w2 = spec.agent_by_id("w2").unwrap();
        let r1 = spec.agent_by_id("r1").unwrap();
        assert_eq!(plan.horizon(w2), 12);
        assert_eq!(plan.horizon(r1), 6);
        assert_eq!(plan.travel_cost, 8.0);
        assert_eq!(plan.allocation.len(), 10);
        assert_eq!(plan.allocation[&spec.task_by_id("t2l5").unwrap()], r1);
    }

    #[test]
    fn json_round_trip() {
        let spec = fixtures::vineyard();
        let plan = vineyard_reference_plan(&spec);
        let back = Plan::from_json(&spec, &plan.to_json(&spec)).unwrap();
        assert_eq!(plan, back);
    }
}
