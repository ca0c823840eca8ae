//! Runtime adaptation: monitor changes against a deployed plan, shrink the
//! set of verified plans, and escalate to re-synthesis or replanning when
//! nothing verified is left.

mod context;
mod engine;
mod reduce;
mod simulate;

use serde::{Deserialize, Serialize};

use crate::planner::PlanError;
use crate::synthesis::SynthesisError;
use crate::uncertainty::ModelError;
use crate::world::WorldError;

pub use context::{AdaptOptions, ExecutionContext, MissionStatus, PsuccMode, StepOutcome, StepRecord};
pub use engine::adapt;
pub use reduce::{reduce_ps_passign, reduce_ps_psucc, reduce_ps_ptask, reduce_ps_tf, select_new_plan, PtaskReduction};
pub use simulate::{simulate, OutcomeMode, Scenario, Trace, TraceRecord};

#[derive(Debug, thiserror::Error)]
pub enum AdaptError {
    #[error("mission unrecoverable: {reason}")]
    Unrecoverable { reason: String },
    #[error("invalid change: {0}")]
    InvalidChange(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no verified plan left to select from")]
    EmptySet,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// A runtime change, stamped with the time unit it is observed in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Change {
    /// The attempt at `task` in this time unit failed.
    C1 { time: usize, task: String },
    /// New mission success floor.
    C2 { time: usize, p_succ: f64 },
    /// New minimum assignment probability.
    C3 { time: usize, gamma: f64 },
    /// New success probability of `agent` on `task`.
    C4 { time: usize, agent: String, task: String, p: f64 },
}

impl Change {
    pub fn time(&self) -> usize {
        match *self {
            Change::C1 { time, .. } | Change::C2 { time, .. } | Change::C3 { time, .. } | Change::C4 { time, .. } => time,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Change::C1 { .. } => "C1",
            Change::C2 { .. } => "C2",
            Change::C3 { .. } => "C3",
            Change::C4 { .. } => "C4",
        }
    }

    fn check(&self) -> Result<(), AdaptError> {
        let p = match *self {
            Change::C1 { .. } => return Ok(()),
            Change::C2 { p_succ, .. } => p_succ,
            Change::C3 { gamma, .. } => gamma,
            Change::C4 { p, .. } => p,
        };
        if !(0.0..=1.0).contains(&p) {
            return Err(AdaptError::InvalidChange(format!("probability {p} outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Level {
    NA,
    A1,
    A2,
    A3,
}

/// Pipeline stages: S0 problem definition, S1 planning, S2 timing,
/// S3 model construction, S4 synthesis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    S0,
    S1,
    S2,
    S3,
    S4,
}

impl Level {
    /// Stages a level re-runs.
    pub fn stages(self) -> Vec<Stage> {
        match self {
            Level::NA | Level::A1 => vec![],
            Level::A2 => vec![Stage::S3, Stage::S4],
            Level::A3 => vec![Stage::S0, Stage::S1, Stage::S2, Stage::S3, Stage::S4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationOutcome {
    pub time: usize,
    pub change: Change,
    pub level: Level,
    /// Budgets now deployed, when they changed.
    pub new_assignment: Option<std::collections::BTreeMap<String, u32>>,
    /// Full plan (executed prefix included), when it changed.
    pub new_plan: Option<Vec<String>>,
    pub stages_rerun: Vec<Stage>,
    pub reduced_set_size: usize,
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::fixtures;
    use crate::planner::{vineyard_reference_plan, Plan};
    use crate::spec::ProblemSpec;
    use crate::synthesis::{plan_hash, synthesize, ArchiveEntry, GaConfig, Objectives, ParetoArchive};
    use crate::uncertainty::build_parametric_model;

    fn setup() -> &'static (ProblemSpec, Plan, ParetoArchive) {
        static CELL: OnceLock<(ProblemSpec, Plan, ParetoArchive)> = OnceLock::new();
        CELL.get_or_init(|| {
            let spec = fixtures::vineyard();
            let plan = vineyard_reference_plan(&spec);
            let model = build_parametric_model(&spec, &plan).unwrap();
            let cfg = GaConfig { evaluations: 2000, ..Default::default() };
            let archive = synthesize(&model, &cfg, plan_hash(&spec, &plan)).unwrap().0;
            (spec, plan, archive)
        })
    }

    fn single_entry_archive(budget_t1l4: u32) -> ParetoArchive {
        let (spec, plan, archive) = setup();
        let model = build_parametric_model(spec, plan).unwrap();
        let mut dict = archive.entries[0].retries.clone();
        dict.insert("t1l4".into(), budget_t1l4);
        let g = model.from_dict(&dict, None).unwrap();
        let o = crate::synthesis::evaluate_objectives(&model, &g).unwrap();
        let mut a = archive.clone();
        a.entries = vec![ArchiveEntry { genotype: g, objectives: Objectives { feasible: true, ..o }, retries: dict }];
        a
    }


    #[test]
    fn replay_scenario_levels_and_stages() {
        let (spec, plan, archive) = setup();
        let sc = Scenario::from_json(fixtures::REPLAY_SCENARIO_JSON).unwrap();
        let t = simulate(spec, plan, archive, &sc, 1, AdaptOptions::default()).unwrap();
        let got: Vec<(usize, Level)> = t.levels();
        assert_eq!(got, vec![(1, Level::NA), (2, Level::A1), (4, Level::NA), (11, Level::A2), (13, Level::A3)]);
        let stages: Vec<Vec<Stage>> = t.adaptations().iter().map(|o| o.stages_rerun.clone()).collect();
        assert_eq!(stages[3], vec![Stage::S3, Stage::S4]);
        assert_eq!(stages[4].len(), 5);
        assert_eq!(t.status, MissionStatus::Succeeded);
        assert_eq!(t.stage_totals[&Stage::S4], 2);
        assert_eq!(t.stage_totals[&Stage::S0], 1);
    }

    #[test]
    fn nominal_run_replays_plan() {
        let (spec, plan, archive) = setup();
        let t = simulate(spec, plan, archive, &Scenario::default(), 0, AdaptOptions::default()).unwrap();
        assert!(t.adaptations().is_empty());
        let actions: Vec<String> = t.steps().iter().map(|s| s.action.clone()).collect();
        let expected: Vec<String> = plan.total_order.iter().map(|a| a.display(spec).to_string()).collect();
        assert_eq!(actions, expected);
        // travel 8, four pruning tasks at 3, three identifications at 5, three monitors at 1
        assert_eq!(t.total_cost, 8.0 + 12.0 + 15.0 + 3.0);
    }

    #[test]
    fn change_after_completion_is_na() {
        let (spec, plan, archive) = setup();
        let sc = Scenario { changes: vec![Change::C2 { time: 40, p_succ: 0.99 }], ..Default::default() };
        let t = simulate(spec, plan, archive, &sc, 0, AdaptOptions::default()).unwrap();
        let a = t.adaptations();
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].level, Level::NA);
        assert!(a[0].stages_rerun.is_empty());
    }

    #[test]
    fn exhausted_budget_without_sibling_replans() {
        let (spec, plan, _) = setup();
        let archive = single_entry_archive(1);
        let sc = Scenario { changes: vec![Change::C1 { time: 1, task: "t1l4".into() }], ..Default::default() };
        let t = simulate(spec, plan, &archive, &sc, 0, AdaptOptions::default()).unwrap();
        assert_eq!(t.levels(), vec![(1, Level::A3)]);
        assert_eq!(t.status, MissionStatus::Succeeded);
        let a3 = t.adaptations()[0].clone();
        let new_plan = a3.new_plan.unwrap();
        assert_eq!(new_plan[0], "Move(w2, l1, l4)");
        // the failed attempt counts against the new budget
        assert!(a3.new_assignment.unwrap()["t1l4"] >= 2 || !new_plan.iter().any(|a| a == "Do(w2, t1l4, l4)"));
    }

    #[test]
    fn impossible_threshold_is_unrecoverable() {
        let (spec, plan, archive) = setup();
        let sc = Scenario { changes: vec![Change::C3 { time: 3, gamma: 1.0 }], ..Default::default() };
        let t = simulate(spec, plan, archive, &sc, 0, AdaptOptions::default()).unwrap();
        assert_eq!(t.status, MissionStatus::Failed);
        assert!(t.records.iter().any(|r| matches!(r, TraceRecord::Unrecoverable { .. })));
    }

    #[test]
    fn misplaced_failure_rejected() {
        let (spec, plan, archive) = setup();
        // time 0 is a move
        let sc = Scenario { changes: vec![Change::C1 { time: 0, task: "t1l4".into() }], ..Default::default() };
        assert!(matches!(
            simulate(spec, plan, archive, &sc, 0, AdaptOptions::default()),
            Err(AdaptError::InvalidChange(_))
        ));
    }

    #[test]
    fn two_changes_in_one_unit_rejected() {
        let sc = Scenario {
            changes: vec![Change::C2 { time: 3, p_succ: 0.9 }, Change::C3 { time: 3, gamma: 0.6 }],
            ..Default::default()
        };
        assert!(matches!(sc.check(), Err(AdaptError::InvalidScenario(_))));
    }

    #[test]
    fn sampled_runs_are_seed_deterministic() {
        let (spec, plan, archive) = setup();
        let sc = Scenario { outcomes: OutcomeMode::Sampled, ..Default::default() };
        let strip = |t: Trace| -> Vec<TraceRecord> {
            t.records
                .into_iter()
                .map(|r| match r {
                    TraceRecord::Adaptation { outcome, stage_totals, .. } => {
                        TraceRecord::Adaptation { outcome, stage_totals, latency_ms: 0.0 }
                    }
                    other => other,
                })
                .collect()
        };
        let a = strip(simulate(spec, plan, archive, &sc, 9, AdaptOptions::default()).unwrap());
        let b = strip(simulate(spec, plan, archive, &sc, 9, AdaptOptions::default()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn ptask_on_completed_task_is_unchanged() {
        let (spec, plan, archive) = setup();
        let sc = Scenario {
            changes: vec![Change::C4 { time: 6, agent: "w2".into(), task: "t1l4".into(), p: 0.2 }],
            ..Default::default()
        };
        let t = simulate(spec, plan, archive, &sc, 0, AdaptOptions::default()).unwrap();
        assert_eq!(t.levels(), vec![(6, Level::NA)]);
    }

    #[test]
    fn ptask_below_threshold_replans() {
        let (spec, plan, archive) = setup();
        let sc = Scenario {
            changes: vec![Change::C4 { time: 5, agent: "w2".into(), task: "t3l9".into(), p: 0.4 }],
            ..Default::default()
        };
        let t = simulate(spec, plan, archive, &sc, 0, AdaptOptions::default()).unwrap();
        assert_eq!(t.levels(), vec![(5, Level::A3)]);
        assert!(!t.steps().iter().any(|s| s.action == "Do(w2, t3l9, l9)"));
    }
}
