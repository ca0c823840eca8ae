use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AdaptError, Stage};
use crate::planner::{Plan, PlannerConfig};
use crate::pmc::MissionMetrics;
use crate::spec::{AgentIx, ProblemSpec, TaskIx};
use crate::synthesis::{ArchiveEntry, GaConfig, ParetoArchive};
use crate::uncertainty::{
    build_from_lanes, evaluate, BuildOptions, ExhaustCost, ModelError, ParametricPlanModel, RetryAssignment,
};
use crate::world::{is_goal, Action, WorldState};

/// Which success probability a new mission floor is compared against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsuccMode {
    /// Probability of finishing the rest of the mission from the current
    /// state, given the failures already observed.
    #[default]
    Remaining,
    /// The entry's stored whole-plan probability.
    WholePlan,
}

#[derive(Clone, Debug, Default)]
pub struct AdaptOptions {
    /// Configuration of the re-synthesis runs triggered by A2 and A3.
    pub ga: GaConfig,
    pub planner: PlannerConfig,
    pub psucc_mode: PsuccMode,
    pub exhaust: ExhaustCost,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissionStatus {
    Running,
    Succeeded,
    Failed,
}

/// How the outcome of a Do is decided.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    /// Every attempt succeeds.
    Nominal,
    Forced(bool),
    /// Uniform draw in [0, 1): success when below the success probability.
    Draw(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub time: usize,
    pub agent: String,
    pub action: String,
    /// Task id of a Do.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// `None` for moves.
    pub success: Option<bool>,
    pub cost: f64,
    pub cumulative_cost: f64,
}

/// Knowledge base and execution state of one running mission.
#[derive(Clone, Debug)]
pub struct ExecutionContext {
    /// Current knowledge: constraints and success probabilities as updated
    /// by observed changes.
    pub spec: ProblemSpec,
    /// Deployed plan; `plan[..cursor]` has been executed.
    pub plan: Vec<Action>,
    pub cursor: usize,
    pub world: WorldState,
    /// Observed failed attempts per (agent, task).
    pub failures: BTreeMap<(AgentIx, TaskIx), u32>,
    /// Total attempt budgets in force, by task id.
    pub budgets: BTreeMap<String, u32>,
    /// Archive entry the budgets were taken from.
    pub deployed: ArchiveEntry,
    /// Verified plans still applicable.
    pub archive: Vec<ArchiveEntry>,
    /// Time unit of the next action.
    pub clock: usize,
    pub status: MissionStatus,
    pub cost: f64,
    pub last_step: Option<StepRecord>,
    /// Times each stage has been re-run.
    pub stage_totals: BTreeMap<Stage, usize>,
    pub options: AdaptOptions,
}

impl ExecutionContext {
    /// Deploys the archive entry matching `deploy` (every given task budget
    /// equal), choosing among matches as [`super::select_new_plan`] does.
    pub fn new(
        spec: &ProblemSpec,
        plan: &Plan,
        archive: &ParetoArchive,
        deploy: Option<&BTreeMap<String, u32>>,
        options: AdaptOptions,
    ) -> Result<Self, AdaptError> {
        let candidates: Vec<ArchiveEntry> = archive
            .entries
            .iter()
            .filter(|e| deploy.is_none_or(|d| d.iter().all(|(k, v)| e.retries.get(k) == Some(v))))
            .cloned()
            .collect();
        let deployed = super::select_new_plan(&candidates)
            .map_err(|_| AdaptError::InvalidScenario("no archive entry matches the deployed budgets".into()))?
            .clone();
        let world = WorldState::initial(spec)?;
        let status = if is_goal(spec, &world) { MissionStatus::Succeeded } else { MissionStatus::Running };
        Ok(ExecutionContext {
            spec: spec.clone(),
            plan: plan.total_order.clone(),
            cursor: 0,
            world,
            failures: BTreeMap::new(),
            budgets: deployed.retries.clone(),
            deployed,
            archive: archive.entries.clone(),
            clock: 0,
            status,
            cost: 0.0,
            last_step: None,
            stage_totals: BTreeMap::new(),
            options,
        })
    }

    pub fn current_action(&self) -> Option<&Action> {
        if self.status == MissionStatus::Running {
            self.plan.get(self.cursor)
        } else {
            None
        }
    }

    pub fn executed(&self) -> &[Action] {
        &self.plan[..self.cursor]
    }

    /// Attempt budget of `task` for `agent` under the deployed budgets.
    pub fn budget(&self, agent: AgentIx, task: TaskIx) -> u32 {
        self.budgets
            .get(&self.spec.task(task).id)
            .copied()
            .unwrap_or_else(|| self.spec.max_retries(agent, task).max(1))
    }

    pub fn failures_of(&self, agent: AgentIx, task: TaskIx) -> u32 {
        self.failures.get(&(agent, task)).copied().unwrap_or(0)
    }

    /// Executes the action of the current time unit and advances the clock.
    /// Returns `None` once the mission is over.
    pub fn execute_step(&mut self, outcome: StepOutcome) -> Result<Option<StepRecord>, AdaptError> {
        let Some(action) = self.current_action().cloned() else {
            self.clock += 1;
            self.last_step = None;
            return Ok(None);
        };
        if !self.world.is_enabled(&self.spec, &action) {
            return Err(AdaptError::Unrecoverable {
                reason: format!("{} is not executable in the current state", action.display(&self.spec)),
            });
        }
        let agent = action.agent();
        let (cost, success) = match action {
            Action::Move { from, to, .. } => (self.spec.distance(from, to).unwrap_or(0.0), None),
            Action::Do { task, .. } => {
                let p = self.spec.p_success(agent, task);
                let ok = match outcome {
                    StepOutcome::Nominal => true,
                    StepOutcome::Forced(b) => b,
                    StepOutcome::Draw(u) => u < p,
                };
                (self.spec.task_cost(agent, task), Some(ok))
            }
        };
        match (action, success) {
            (Action::Do { task, .. }, Some(false)) => {
                *self.failures.entry((agent, task)).or_insert(0) += 1;
            }
            _ => {
                self.world.apply_unchecked(&self.spec, &action);
                self.cursor += 1;
            }
        }
        self.cost += cost;
        let rec = StepRecord {
            time: self.clock,
            agent: self.spec.agent(agent).id.clone(),
            action: action.display(&self.spec).to_string(),
            task: action.task().map(|t| self.spec.task(t).id.clone()),
            success,
            cost,
            cumulative_cost: self.cost,
        };
        self.clock += 1;
        if self.cursor == self.plan.len() {
            self.status = if is_goal(&self.spec, &self.world) { MissionStatus::Succeeded } else { MissionStatus::Failed };
        }
        self.last_step = Some(rec.clone());
        Ok(Some(rec))
    }

    /// Fails the mission when the pending attempt has no budget left.
    pub fn check_exhaustion(&mut self) {
        if let Some(&Action::Do { agent, task, .. }) = self.current_action() {
            if self.failures_of(agent, task) >= self.budget(agent, task) {
                self.status = MissionStatus::Failed;
            }
        }
    }

    /// Undone part of the plan, split by agent.
    pub fn suffix_lanes(&self) -> Vec<(AgentIx, Vec<Action>)> {
        let mut lanes: Vec<(AgentIx, Vec<Action>)> = self.spec.agent_indices().map(|a| (a, Vec::new())).collect();
        for a in &self.plan[self.cursor..] {
            lanes[a.agent().ix()].1.push(*a);
        }
        lanes
    }

    /// (agent, task) pairs of the Dos still to run.
    pub fn remaining_allocations(&self) -> Vec<(AgentIx, TaskIx)> {
        self.plan[self.cursor..]
            .iter()
            .filter_map(|a| match *a {
                Action::Do { agent, task, .. } => Some((agent, task)),
                Action::Move { .. } => None,
            })
            .collect()
    }

    /// Failures already spent on the remaining Dos.
    pub fn consumed(&self) -> BTreeMap<(AgentIx, TaskIx), u32> {
        self.remaining_allocations()
            .into_iter()
            .filter_map(|k| self.failures.get(&k).map(|&f| (k, f)))
            .filter(|(_, f)| *f > 0)
            .collect()
    }

    /// Model of the remaining mission under `spec`.
    pub fn suffix_model(&self, spec: &ProblemSpec) -> Result<ParametricPlanModel, ModelError> {
        let opts = BuildOptions { exhaust: self.options.exhaust, consumed: self.consumed() };
        build_from_lanes(spec, &self.suffix_lanes(), &opts)
    }

    /// The entry's budgets on the slots of `model`, falling back to the
    /// deployed budgets; `None` when some budget is already used up.
    pub fn assignment_for(&self, model: &ParametricPlanModel, entry: &ArchiveEntry) -> Option<RetryAssignment> {
        let mut out = Vec::with_capacity(model.slots.len());
        for slot in &model.slots {
            let v = entry.retries.get(&slot.task_id).or_else(|| self.budgets.get(&slot.task_id)).copied()?;
            if v < slot.lo || v > slot.hi {
                return None;
            }
            out.push(v);
        }
        Some(RetryAssignment(out))
    }

    /// Metrics of the rest of the mission under `entry`, conditioned on the
    /// progress so far.
    pub fn remaining_metrics(&self, entry: &ArchiveEntry) -> Result<Option<MissionMetrics>, ModelError> {
        let model = self.suffix_model(&self.spec)?;
        match self.assignment_for(&model, entry) {
            Some(a) => Ok(Some(evaluate(&model, &a)?)),
            None => Ok(None),
        }
    }

    /// Agent of the plan's Do for `task`, if any.
    fn allocated_agent(&self, task: TaskIx) -> Option<AgentIx> {
        self.plan.iter().find_map(|a| match *a {
            Action::Do { agent, task: t, .. } if t == task => Some(agent),
            _ => None,
        })
    }

    /// Every budget the entry sets covers the failures already observed.
    pub fn is_consistent(&self, entry: &ArchiveEntry) -> bool {
        entry.retries.iter().all(|(id, &b)| {
            let Some(t) = self.spec.task_by_id(id) else { return false };
            match self.allocated_agent(t) {
                Some(a) => self.failures_of(a, t) < b,
                None => true,
            }
        })
    }

    /// Entries of the current archive consistent with the progress.
    pub fn consistent_entries(&self) -> Vec<ArchiveEntry> {
        self.archive.iter().filter(|e| self.is_consistent(e)).cloned().collect()
    }

    pub(crate) fn deploy(&mut self, entry: &ArchiveEntry) {
        for (k, v) in &entry.retries {
            self.budgets.insert(k.clone(), *v);
        }
        self.deployed = entry.clone();
    }

    pub(crate) fn is_deployed_in(&self, set: &[ArchiveEntry]) -> bool {
        set.iter().any(|e| e.retries == self.deployed.retries)
    }

    pub(crate) fn record_stages(&mut self, stages: &[Stage]) {
        for s in stages {
            *self.stage_totals.entry(*s).or_insert(0) += 1;
        }
    }
}
