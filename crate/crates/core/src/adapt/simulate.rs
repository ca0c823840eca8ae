use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    adapt, AdaptError, AdaptOptions, AdaptationOutcome, Change, ExecutionContext, Level, MissionStatus, Stage,
    StepOutcome, StepRecord,
};
use crate::planner::Plan;
use crate::spec::ProblemSpec;
use crate::synthesis::ParetoArchive;
use crate::world::Action;

/// How Do outcomes are decided outside scripted failures.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeMode {
    /// Every attempt succeeds unless a C1 says otherwise.
    #[default]
    Nominal,
    /// Bernoulli draws from the seeded generator.
    Sampled,
}

/// Scripted changes for one mission run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub changes: Vec<Change>,
    /// Budgets of the archive entry to deploy first (a partial dictionary
    /// selects among matching entries).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deploy: Option<BTreeMap<String, u32>>,
    #[serde(default)]
    pub outcomes: OutcomeMode,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, AdaptError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| AdaptError::InvalidScenario(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    /// Changes strictly ordered in time, hence at most one per time unit.
    pub fn check(&self) -> Result<(), AdaptError> {
        for w in self.changes.windows(2) {
            if w[1].time() <= w[0].time() {
                return Err(AdaptError::InvalidScenario(format!(
                    "changes at times {} and {} break the one-change-per-time-unit order",
                    w[0].time(),
                    w[1].time()
                )));
            }
        }
        for c in &self.changes {
            c.check()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceRecord {
    Step(StepRecord),
    Adaptation {
        #[serde(flatten)]
        outcome: AdaptationOutcome,
        /// Cumulative stage re-runs after this event.
        stage_totals: BTreeMap<Stage, usize>,
        /// Wall-clock time of the adaptation; not part of any determinism
        /// contract.
        latency_ms: f64,
    },
    Unrecoverable {
        time: usize,
        change: Change,
        reason: String,
    },
    End {
        time: usize,
        status: MissionStatus,
        total_cost: f64,
        executed: Vec<String>,
        stage_totals: BTreeMap<Stage, usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub status: MissionStatus,
    pub total_cost: f64,
    pub stage_totals: BTreeMap<Stage, usize>,
}

impl Trace {
    pub fn adaptations(&self) -> Vec<&AdaptationOutcome> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Adaptation { outcome, .. } => Some(outcome),
                _ => None,
            })
            .collect()
    }

    pub fn levels(&self) -> Vec<(usize, Level)> {
        self.adaptations().iter().map(|o| (o.time, o.level)).collect()
    }

    pub fn steps(&self) -> Vec<&StepRecord> {
        self.records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Step(s) => Some(s),
                _ => None,
            })
            .collect()
    }

    /// One JSON document per line.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("trace records always serialize"));
            s.push('\n');
        }
        s
    }
}

/// Upper bound on simulated time units, against runaway scenarios.
const MAX_TIME: usize = 1_000_000;

/// Executes the plan one action per time unit, injecting the scenario's
/// changes and adapting to them (and to sampled failures).
pub fn simulate(
    spec: &ProblemSpec,
    plan: &Plan,
    archive: &ParetoArchive,
    scenario: &Scenario,
    seed: u64,
    options: AdaptOptions,
) -> Result<Trace, AdaptError> {
    scenario.check()?;
    let mut ctx = ExecutionContext::new(spec, plan, archive, scenario.deploy.as_ref(), options)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut changes = scenario.changes.iter().peekable();
    let mut time = 0;
    while ctx.status == MissionStatus::Running || changes.peek().is_some() {
        if time >= MAX_TIME {
            return Err(AdaptError::InvalidScenario(format!("mission still running after {MAX_TIME} time units")));
        }
        let change = changes.next_if(|c| c.time() == time);
        let outcome = match (change, ctx.current_action()) {
            (Some(Change::C1 { .. }), _) => StepOutcome::Forced(false),
            (_, Some(Action::Do { .. })) if scenario.outcomes == OutcomeMode::Sampled => StepOutcome::Draw(rng.gen()),
            _ => StepOutcome::Nominal,
        };
        let mut events: Vec<Change> = Vec::new();
        match ctx.execute_step(outcome) {
            Ok(Some(rec)) => {
                if rec.success == Some(false) && !matches!(change, Some(Change::C1 { .. })) {
                    events.push(Change::C1 { time, task: rec.task.clone().unwrap_or_default() });
                }
                records.push(TraceRecord::Step(rec));
            }
            Ok(None) => {}
            Err(AdaptError::Unrecoverable { reason }) => {
                ctx.status = MissionStatus::Failed;
                records.push(TraceRecord::Unrecoverable {
                    time,
                    change: change.cloned().unwrap_or(Change::C1 { time, task: String::new() }),
                    reason,
                });
            }
            Err(e) => return Err(e),
        }
        events.extend(change.cloned());
        for ev in events {
            let start = Instant::now();
            match adapt(&mut ctx, &ev) {
                Ok(outcome) => records.push(TraceRecord::Adaptation {
                    outcome,
                    stage_totals: ctx.stage_totals.clone(),
                    latency_ms: start.elapsed().as_secs_f64() * 1e3,
                }),
                Err(AdaptError::Unrecoverable { reason }) => {
                    ctx.status = MissionStatus::Failed;
                    records.push(TraceRecord::Unrecoverable { time, change: ev, reason });
                }
                Err(e) => return Err(e),
            }
        }
        ctx.check_exhaustion();
        time += 1;
    }
    records.push(TraceRecord::End {
        time,
        status: ctx.status,
        total_cost: ctx.cost,
        executed: ctx.executed().iter().map(|a| a.display(&ctx.spec).to_string()).collect(),
        stage_totals: ctx.stage_totals.clone(),
    });
    Ok(Trace { records, status: ctx.status, total_cost: ctx.cost, stage_totals: ctx.stage_totals })
}
