//! Plans augmented with uncertainty: per-agent parametric chains whose
//! parameters are the retry budgets of the agent's tasks.

mod chain;
mod prism;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::planner::Plan;
use crate::pmc::{factored_metrics_with, MissionMetrics, PmcError, SolverOptions};
use crate::spec::{AgentIx, LocIx, ProblemSpec, TaskIx};
use crate::world::Action;

pub use chain::{instantiate, instantiate_chain};
pub use prism::{export_model_source, export_properties};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("agent '{agent}' has no capability for task '{task}'")]
    UnknownCapability { agent: String, task: String },
    #[error("retry budget {value} for '{slot}' outside [{lo}, {hi}]")]
    OutOfRange { slot: String, value: u32, lo: u32, hi: u32 },
    #[error("assignment has {got} entries, model has {expected} retry slots")]
    WrongLength { expected: usize, got: usize },
    #[error("no retry slot for task '{0}'")]
    UnknownSlot(String),
    #[error("no budget given for task '{0}'")]
    MissingSlot(String),
    #[error("agent '{agent}' has no attempts left for task '{task}'")]
    Exhausted { agent: String, task: String },
    #[error("degenerate model: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Pmc(#[from] PmcError),
}

/// Reward of the deterministic transition taken when a task's budget runs
/// out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExhaustCost {
    /// Bookkeeping only, no cost.
    #[default]
    Zero,
    /// Charge the task cost once more.
    Charge,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildOptions {
    pub exhaust: ExhaustCost,
    /// Attempts already spent, per (agent, task). A slot with `f` spent
    /// attempts starts its counter at `f` and its budget range at `f + 1`.
    pub consumed: BTreeMap<(AgentIx, TaskIx), u32>,
}

/// A synthesis parameter: the attempt budget of one task for one agent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RetrySlot {
    #[serde(skip)]
    pub agent: AgentIx,
    #[serde(skip)]
    pub task: TaskIx,
    pub agent_id: String,
    pub task_id: String,
    /// Inclusive budget range.
    pub lo: u32,
    pub hi: u32,
    /// Attempts spent before the model starts.
    pub consumed: u32,
}

impl RetrySlot {
    pub fn range_len(&self) -> u32 {
        self.hi - self.lo + 1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    Move { from: LocIx, to: LocIx, cost: f64 },
    /// `slot` is an index into [`ParametricPlanModel::slots`]; `None` means
    /// a single attempt.
    Do { task: TaskIx, task_id: String, p: f64, cost: f64, slot: Option<usize> },
}

/// The chain of one agent: its plan actions in order.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentChain {
    pub agent: AgentIx,
    pub agent_id: String,
    pub actions: Vec<Action>,
    pub steps: Vec<Step>,
    /// Slots of this chain, in step order.
    pub slots: Vec<usize>,
}

impl AgentChain {
    pub fn n_act(&self) -> usize {
        self.steps.len()
    }
}

/// A vector of attempt budgets aligned with [`ParametricPlanModel::slots`].
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RetryAssignment(pub Vec<u32>);

#[derive(Clone, Debug, PartialEq)]
pub struct ParametricPlanModel {
    pub chains: Vec<AgentChain>,
    pub slots: Vec<RetrySlot>,
    /// Mission success floor.
    pub p_succ: f64,
    pub exhaust: ExhaustCost,
}

/// Builds one chain per agent that has actions in the plan.
pub fn build_parametric_model(spec: &ProblemSpec, plan: &Plan) -> Result<ParametricPlanModel, ModelError> {
    build_parametric_model_with(spec, plan, &BuildOptions::default())
}

pub fn build_parametric_model_with(
    spec: &ProblemSpec,
    plan: &Plan,
    opts: &BuildOptions,
) -> Result<ParametricPlanModel, ModelError> {
    let lanes: Vec<(AgentIx, Vec<Action>)> =
        spec.agent_indices().map(|a| (a, plan.per_agent[a.ix()].clone())).collect();
    build_from_lanes(spec, &lanes, opts)
}

/// Builds a model from explicit per-agent action sequences (e.g. the
/// unexecuted remainder of a plan).
pub fn build_from_lanes(
    spec: &ProblemSpec,
    lanes: &[(AgentIx, Vec<Action>)],
    opts: &BuildOptions,
) -> Result<ParametricPlanModel, ModelError> {
    let mut chains = Vec::new();
    let mut slots = Vec::new();
    for (agent, actions) in lanes {
        if actions.is_empty() {
            continue;
        }
        let agent = *agent;
        let agent_id = spec.agent(agent).id.clone();
        let mut steps = Vec::with_capacity(actions.len());
        let mut chain_slots = Vec::new();
        for action in actions {
            match *action {
                Action::Move { from, to, .. } => {
                    steps.push(Step::Move { from, to, cost: spec.distance(from, to).unwrap_or(0.0) })
                }
                Action::Do { task, .. } => {
                    let cap = spec.capability(agent, task).ok_or_else(|| ModelError::UnknownCapability {
                        agent: agent_id.clone(),
                        task: spec.task(task).id.clone(),
                    })?;
                    let consumed = opts.consumed.get(&(agent, task)).copied().unwrap_or(0);
                    let slot = if cap.max_retries > 0 {
                        if consumed >= cap.max_retries {
                            return Err(ModelError::Exhausted { agent: agent_id.clone(), task: spec.task(task).id.clone() });
                        }
                        slots.push(RetrySlot {
                            agent,
                            task,
                            agent_id: agent_id.clone(),
                            task_id: spec.task(task).id.clone(),
                            lo: consumed + 1,
                            hi: cap.max_retries,
                            consumed,
                        });
                        chain_slots.push(slots.len() - 1);
                        Some(slots.len() - 1)
                    } else {
                        if consumed > 0 {
                            return Err(ModelError::Exhausted { agent: agent_id.clone(), task: spec.task(task).id.clone() });
                        }
                        None
                    };
                    steps.push(Step::Do {
                        task,
                        task_id: spec.task(task).id.clone(),
                        p: spec.p_success(agent, task),
                        cost: cap.cost,
                        slot,
                    });
                }
            }
        }
        chains.push(AgentChain { agent, agent_id, actions: actions.clone(), steps, slots: chain_slots });
    }
    Ok(ParametricPlanModel { chains, slots, p_succ: spec.constraints().p_succ, exhaust: opts.exhaust })
}

impl ParametricPlanModel {
    pub fn check(&self, a: &RetryAssignment) -> Result<(), ModelError> {
        if a.0.len() != self.slots.len() {
            return Err(ModelError::WrongLength { expected: self.slots.len(), got: a.0.len() });
        }
        for (slot, &v) in self.slots.iter().zip(&a.0) {
            if v < slot.lo || v > slot.hi {
                return Err(ModelError::OutOfRange { slot: slot.task_id.clone(), value: v, lo: slot.lo, hi: slot.hi });
            }
        }
        Ok(())
    }

    /// Smallest budget everywhere.
    pub fn minimal_assignment(&self) -> RetryAssignment {
        RetryAssignment(self.slots.iter().map(|s| s.lo).collect())
    }

    /// Number of genotypes, saturating at `u128::MAX`.
    pub fn space_size(&self) -> u128 {
        self.slots.iter().fold(1u128, |acc, s| acc.saturating_mul(s.range_len() as u128))
    }

    pub fn slot_of_task(&self, task_id: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.task_id == task_id)
    }

    /// Task-id → budget dictionary.
    pub fn to_dict(&self, a: &RetryAssignment) -> BTreeMap<String, u32> {
        self.slots.iter().zip(&a.0).map(|(s, v)| (s.task_id.clone(), *v)).collect()
    }

    /// Reads a task-id → budget dictionary. With `fill` set, slots missing
    /// from the dictionary take that value (clamped into range).
    pub fn from_dict(&self, dict: &BTreeMap<String, u32>, fill: Option<u32>) -> Result<RetryAssignment, ModelError> {
        for k in dict.keys() {
            if self.slot_of_task(k).is_none() {
                return Err(ModelError::UnknownSlot(k.clone()));
            }
        }
        let values = self
            .slots
            .iter()
            .map(|s| match (dict.get(&s.task_id), fill) {
                (Some(v), _) => Ok(*v),
                (None, Some(f)) => Ok(f.clamp(s.lo, s.hi)),
                (None, None) => Err(ModelError::MissingSlot(s.task_id.clone())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let a = RetryAssignment(values);
        self.check(&a)?;
        Ok(a)
    }
}

/// Success probability and expected cost of the instantiated model.
pub fn evaluate(model: &ParametricPlanModel, a: &RetryAssignment) -> Result<MissionMetrics, ModelError> {
    evaluate_with(model, a, &SolverOptions::default())
}

pub fn evaluate_with(
    model: &ParametricPlanModel,
    a: &RetryAssignment,
    opts: &SolverOptions,
) -> Result<MissionMetrics, ModelError> {
    let chains = instantiate(model, a)?;
    Ok(factored_metrics_with(&chains, opts)?)
}
