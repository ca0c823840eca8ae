mod common;

use std::sync::OnceLock;

use hytask::adapt::{
    adapt, simulate, AdaptError, AdaptOptions, Change, ExecutionContext, Level, MissionStatus, Scenario, StepOutcome,
    TraceRecord,
};
use hytask::fixtures;
use hytask::planner::{vineyard_reference_plan, Plan};
use hytask::spec::ProblemSpec;
use hytask::synthesis::{plan_hash, synthesize, GaConfig, ParetoArchive};
use hytask::uncertainty::build_parametric_model;

use common::survivors::{check_survivors, remaining_oracle};

fn setup() -> &'static (ProblemSpec, Plan, ParetoArchive) {
    static CELL: OnceLock<(ProblemSpec, Plan, ParetoArchive)> = OnceLock::new();
    CELL.get_or_init(|| {
        let spec = fixtures::vineyard();
        let plan = vineyard_reference_plan(&spec);
        let model = build_parametric_model(&spec, &plan).unwrap();
        let (archive, _) = synthesize(&model, &GaConfig::default(), plan_hash(&spec, &plan)).unwrap();
        (spec, plan, archive)
    })
}

fn context(deploy: &[(&str, u32)]) -> ExecutionContext {
    let (spec, plan, archive) = setup();
    let d = common::budgets(deploy);
    ExecutionContext::new(spec, plan, archive, (!deploy.is_empty()).then_some(&d), AdaptOptions::default()).unwrap()
}

fn run(ctx: &mut ExecutionContext, steps: usize) {
    for _ in 0..steps {
        ctx.execute_step(StepOutcome::Nominal).unwrap();
    }
}

/// Forces a failure of the current Do and reports it.
fn fail_once(ctx: &mut ExecutionContext) -> Result<Level, AdaptError> {
    let rec = ctx.execute_step(StepOutcome::Forced(false)).unwrap().unwrap();
    adapt(ctx, &Change::C1 { time: rec.time, task: rec.task.unwrap() }).map(|o| o.level)
}

#[test]
fn c1_escalates_from_na_to_a1_to_a3() {
    let mut ctx = context(&[("t1l4", 2)]);
    run(&mut ctx, 1);
    assert_eq!(fail_once(&mut ctx).unwrap(), Level::NA);
    check_survivors(&ctx, Level::NA);
    assert_eq!(fail_once(&mut ctx).unwrap(), Level::A1);
    check_survivors(&ctx, Level::A1);
    assert!(ctx.deployed.retries["t1l4"] > 2);

    // w2 may try t1l4 at most five times; the fifth failure forces a new plan
    let mut levels = Vec::new();
    while ctx.failures_of(ctx.spec.agent_by_id("w2").unwrap(), ctx.spec.task_by_id("t1l4").unwrap()) < 5 {
        levels.push(fail_once(&mut ctx).unwrap());
        if *levels.last().unwrap() == Level::A3 {
            break;
        }
    }
    assert_eq!(levels.last(), Some(&Level::A3), "{levels:?}");
    check_survivors(&ctx, Level::A3);
    let t1l4 = ctx.spec.task_by_id("t1l4").unwrap();
    let doer = ctx.plan[ctx.cursor..].iter().find(|a| a.task() == Some(t1l4)).unwrap().agent();
    assert_eq!(ctx.spec.agent(doer).id, "w1");
    while ctx.status == MissionStatus::Running {
        ctx.execute_step(StepOutcome::Nominal).unwrap();
    }
    assert_eq!(ctx.status, MissionStatus::Succeeded);
}

#[test]
fn c2_levels() {
    // relaxing the floor keeps everything
    let mut ctx = context(&[]);
    run(&mut ctx, 4);
    let before = ctx.archive.len();
    assert_eq!(adapt(&mut ctx, &Change::C2 { time: 4, p_succ: 0.8 }).unwrap().level, Level::NA);
    assert_eq!(ctx.archive.len(), before);
    check_survivors(&ctx, Level::NA);

    // a floor between the deployed entry and the best one switches entry
    let mut ctx = context(&[]);
    run(&mut ctx, 4);
    let deployed = remaining_oracle(&ctx, &ctx.deployed.retries).0;
    let best = ctx.archive.iter().map(|e| remaining_oracle(&ctx, &e.retries).0).fold(0.0, f64::max);
    assert!(best > deployed);
    let floor = (deployed + best) / 2.0;
    assert_eq!(adapt(&mut ctx, &Change::C2 { time: 4, p_succ: floor }).unwrap().level, Level::A1);
    check_survivors(&ctx, Level::A1);
    for e in &ctx.archive {
        assert!(remaining_oracle(&ctx, &e.retries).0 >= floor);
    }

    // a floor above the whole set needs a new plan and a fresh archive
    let mut ctx = context(&[]);
    ctx.options.ga.evaluations = 1000;
    let best = ctx.archive.iter().map(|e| e.objectives.success_prob).fold(0.0, f64::max);
    let floor = best + 0.01 * (1.0 - best);
    let o = adapt(&mut ctx, &Change::C2 { time: 0, p_succ: floor }).unwrap();
    assert_eq!(o.level, Level::A3);
    assert!(o.new_plan.is_some());
    check_survivors(&ctx, Level::A3);
}

#[test]
fn c3_levels() {
    let mut ctx = context(&[]);
    run(&mut ctx, 2);
    assert_eq!(adapt(&mut ctx, &Change::C3 { time: 2, gamma: 0.6 }).unwrap().level, Level::NA);
    check_survivors(&ctx, Level::NA);

    // once w2 is only 0.8 reliable at t3l9, a 0.9 threshold rules it out
    let mut ctx = context(&[]);
    run(&mut ctx, 2);
    assert_eq!(adapt(&mut ctx, &Change::C4 { time: 2, agent: "w2".into(), task: "t3l9".into(), p: 0.8 }).unwrap().level, Level::A2);
    run(&mut ctx, 1);
    let o = adapt(&mut ctx, &Change::C3 { time: 3, gamma: 0.9 }).unwrap();
    assert_eq!(o.level, Level::A3);
    check_survivors(&ctx, Level::A3);
    for a in &ctx.plan[ctx.cursor..] {
        if let Some(t) = a.task() {
            assert!(ctx.spec.p_success(a.agent(), t) >= 0.9);
        }
    }
}

#[test]
fn c4_levels() {
    // w1 never works at l4 in this plan
    let mut ctx = context(&[]);
    run(&mut ctx, 1);
    let n = ctx.archive.len();
    assert_eq!(adapt(&mut ctx, &Change::C4 { time: 1, agent: "w1".into(), task: "t1l4".into(), p: 0.3 }).unwrap().level, Level::NA);
    assert_eq!(ctx.archive.len(), n);

    // t3l4 is already done by time 3
    let mut ctx = context(&[]);
    run(&mut ctx, 3);
    assert_eq!(adapt(&mut ctx, &Change::C4 { time: 3, agent: "w2".into(), task: "t3l4".into(), p: 0.6 }).unwrap().level, Level::NA);

    let mut ctx = context(&[]);
    run(&mut ctx, 5);
    let o = adapt(&mut ctx, &Change::C4 { time: 5, agent: "w2".into(), task: "t3l9".into(), p: 0.89 }).unwrap();
    assert_eq!(o.level, Level::A2);
    assert!(o.new_plan.is_none());
    check_survivors(&ctx, Level::A2);

    let mut ctx = context(&[]);
    run(&mut ctx, 5);
    let o = adapt(&mut ctx, &Change::C4 { time: 5, agent: "w2".into(), task: "t3l9".into(), p: 0.4 }).unwrap();
    assert_eq!(o.level, Level::A3);
    check_survivors(&ctx, Level::A3);
    let t = ctx.spec.task_by_id("t3l9").unwrap();
    let doer = ctx.plan[ctx.cursor..].iter().find(|a| a.task() == Some(t)).unwrap().agent();
    assert_ne!(ctx.spec.agent(doer).id, "w2");
}

#[test]
fn bad_changes_are_refused() {
    let mut ctx = context(&[]);
    run(&mut ctx, 1);
    // nothing failed at time 0
    assert!(matches!(adapt(&mut ctx, &Change::C1 { time: 0, task: "t1l4".into() }), Err(AdaptError::InvalidChange(_))));
    assert!(adapt(&mut ctx, &Change::C4 { time: 1, agent: "r1".into(), task: "t1l4".into(), p: 0.5 }).is_err());
    assert!(adapt(&mut ctx, &Change::C2 { time: 1, p_succ: 1.5 }).is_err());
    assert!(Scenario::from_json(r#"{"changes": [{"type": "C2", "time": 3, "p_succ": 0.9}, {"type": "C2", "time": 3, "p_succ": 0.8}]}"#).is_err());
}

fn without_latency(records: &[TraceRecord]) -> Vec<TraceRecord> {
    records
        .iter()
        .cloned()
        .map(|mut r| {
            if let TraceRecord::Adaptation { latency_ms, .. } = &mut r {
                *latency_ms = 0.0;
            }
            r
        })
        .collect()
}

#[test]
fn replay_scenario_levels() {
    let (spec, plan, archive) = setup();
    let scenario = Scenario::from_json(fixtures::REPLAY_SCENARIO_JSON).unwrap();
    let trace = simulate(spec, plan, archive, &scenario, 0, AdaptOptions::default()).unwrap();
    assert_eq!(trace.levels(), vec![(1, Level::NA), (2, Level::A1), (4, Level::NA), (11, Level::A2), (13, Level::A3)]);
    assert_eq!(trace.status, MissionStatus::Succeeded);
    let again = simulate(spec, plan, archive, &scenario, 0, AdaptOptions::default()).unwrap();
    assert_eq!(without_latency(&trace.records), without_latency(&again.records));
}

#[test]
fn sampled_runs_are_seeded() {
    let (spec, plan, archive) = setup();
    let scenario = Scenario { outcomes: hytask::adapt::OutcomeMode::Sampled, ..Default::default() };
    let mut seen_failure = false;
    for seed in 0..100 {
        let a = simulate(spec, plan, archive, &scenario, seed, AdaptOptions::default()).unwrap();
        let b = simulate(spec, plan, archive, &scenario, seed, AdaptOptions::default()).unwrap();
        assert_eq!(without_latency(&a.records), without_latency(&b.records));
        // every failure is reported as a C1 in the same time unit
        let failures = a.steps().iter().filter(|s| s.success == Some(false)).count();
        let reported = a.adaptations().iter().filter(|o| matches!(o.change, Change::C1 { .. })).count()
            + a.records.iter().filter(|r| matches!(r, TraceRecord::Unrecoverable { .. })).count();
        assert_eq!(failures, reported, "seed {seed}");
        seen_failure |= failures > 0;
    }
    assert!(seen_failure);
}
