use std::collections::BTreeSet;

use super::{
    reduce_ps_passign, reduce_ps_psucc, reduce_ps_ptask, reduce_ps_tf, select_new_plan, AdaptError, AdaptationOutcome,
    Change, ExecutionContext, Level, MissionStatus, PtaskReduction,
};
use crate::planner::plan_mission;
use crate::spec::{MissionConstraints, TaskIx};
use crate::synthesis::{actions_hash, synthesize, ArchiveEntry};
use crate::uncertainty::{build_parametric_model_with, BuildOptions};
use crate::world::{Action, WorldState};

/// Handles one observed change: updates the knowledge base, reduces the
/// verified-plan set and escalates when it runs dry.
pub fn adapt(ctx: &mut ExecutionContext, change: &Change) -> Result<AdaptationOutcome, AdaptError> {
    change.check()?;
    let time = change.time();
    if time + 1 < ctx.clock {
        return Err(AdaptError::InvalidChange(format!("change at time {time} arrives after time {}", ctx.clock - 1)));
    }
    let outcome = |level: Level, reduced: usize| AdaptationOutcome {
        time,
        change: change.clone(),
        level,
        new_assignment: None,
        new_plan: None,
        stages_rerun: level.stages(),
        reduced_set_size: reduced,
    };

    // knowledge-base update happens whether or not the mission still runs
    match change {
        Change::C1 { .. } => {}
        Change::C2 { p_succ, .. } => {
            let c = ctx.spec.constraints();
            ctx.spec = ctx.spec.with_constraints(MissionConstraints { p_succ: *p_succ, ..c });
        }
        Change::C3 { gamma, .. } => {
            let c = ctx.spec.constraints();
            ctx.spec = ctx.spec.with_constraints(MissionConstraints { gamma: *gamma, ..c });
        }
        Change::C4 { agent, task, p, .. } => {
            let a = ctx.spec.agent_by_id(agent).ok_or_else(|| AdaptError::InvalidChange(format!("unknown agent '{agent}'")))?;
            let t = resolve_task(ctx, task)?;
            if ctx.spec.capability(a, t).is_none() {
                return Err(AdaptError::InvalidChange(format!("agent '{agent}' cannot perform '{task}'")));
            }
            ctx.spec = ctx.spec.with_success_override(a, t, *p);
        }
    }
    if ctx.status != MissionStatus::Running {
        return Ok(outcome(Level::NA, ctx.archive.len()));
    }

    let reduced = match change {
        Change::C1 { task, .. } => {
            let t = resolve_task(ctx, task)?;
            let observed = ctx.last_step.as_ref().is_some_and(|s| {
                s.time == time && s.success == Some(false) && s.task.as_deref() == Some(task.as_str())
            });
            if !observed {
                return Err(AdaptError::InvalidChange(format!("no failed attempt at '{task}' in time unit {time}")));
            }
            reduce_ps_tf(ctx, t)
        }
        Change::C2 { p_succ, .. } => reduce_ps_psucc(ctx, *p_succ)?,
        Change::C3 { gamma, .. } => reduce_ps_passign(ctx, *gamma),
        Change::C4 { agent, task, p, .. } => {
            let a = ctx.spec.agent_by_id(agent).expect("checked above");
            let t = resolve_task(ctx, task)?;
            match reduce_ps_ptask(ctx, a, t, *p) {
                PtaskReduction::Unchanged(set) => set,
                PtaskReduction::Rebuild => return resynthesize(ctx, change),
                PtaskReduction::Replan => return replan(ctx, change),
            }
        }
    };

    if ctx.is_deployed_in(&reduced) {
        let n = reduced.len();
        ctx.archive = reduced;
        return Ok(outcome(Level::NA, n));
    }
    match select_new_plan(&reduced) {
        Ok(entry) => {
            let entry = entry.clone();
            let n = reduced.len();
            ctx.archive = reduced;
            ctx.deploy(&entry);
            ctx.record_stages(&Level::A1.stages());
            let mut o = outcome(Level::A1, n);
            o.new_assignment = Some(ctx.budgets.clone());
            Ok(o)
        }
        Err(_) => replan(ctx, change),
    }
}

fn resolve_task(ctx: &ExecutionContext, id: &str) -> Result<TaskIx, AdaptError> {
    ctx.spec.task_by_id(id).ok_or_else(|| AdaptError::InvalidChange(format!("unknown task '{id}'")))
}

fn current_hash(ctx: &ExecutionContext) -> String {
    actions_hash(&ctx.spec, &ctx.plan)
}

/// A2: rebuild the model of the remaining mission and synthesize a fresh
/// archive for it; falls through to replanning when nothing is feasible.
fn resynthesize(ctx: &mut ExecutionContext, change: &Change) -> Result<AdaptationOutcome, AdaptError> {
    let model = ctx.suffix_model(&ctx.spec)?;
    let (archive, _) = synthesize(&model, &ctx.options.ga, current_hash(ctx))?;
    if archive.is_empty() {
        return replan(ctx, change);
    }
    let entry = select_new_plan(&archive.entries)?.clone();
    ctx.archive = archive.entries;
    ctx.deploy(&entry);
    ctx.record_stages(&Level::A2.stages());
    Ok(AdaptationOutcome {
        time: change.time(),
        change: change.clone(),
        level: Level::A2,
        new_assignment: Some(ctx.budgets.clone()),
        new_plan: None,
        stages_rerun: Level::A2.stages(),
        reduced_set_size: ctx.archive.len(),
    })
}

/// A3: plan the undone tasks from the current world state under the
/// updated knowledge, then model and synthesize the new remainder.
fn replan(ctx: &mut ExecutionContext, change: &Change) -> Result<AdaptationOutcome, AdaptError> {
    let fail = |ctx: &mut ExecutionContext, reason: String| {
        ctx.status = MissionStatus::Failed;
        AdaptError::Unrecoverable { reason }
    };
    let pending: BTreeSet<TaskIx> = ctx.spec.task_indices().filter(|t| !ctx.world.is_done(*t)).collect();
    let mut spec = ctx.spec.with_initial(ctx.world.agent_loc.clone(), pending.clone());
    for (&(a, t), &f) in &ctx.failures {
        if pending.contains(&t) && f >= ctx.spec.max_retries(a, t) {
            spec = spec.with_success_override(a, t, 0.0);
        }
    }
    let plan = match plan_mission(&spec, &ctx.options.planner) {
        Ok((plan, _)) => plan,
        Err(e) => return Err(fail(ctx, format!("replanning failed: {e}"))),
    };
    let consumed = plan
        .total_order
        .iter()
        .filter_map(|a| match *a {
            Action::Do { agent, task, .. } => ctx.failures.get(&(agent, task)).map(|&f| ((agent, task), f)),
            Action::Move { .. } => None,
        })
        .collect();
    let opts = BuildOptions { exhaust: ctx.options.exhaust, consumed };
    let model = match build_parametric_model_with(&spec, &plan, &opts) {
        Ok(m) => m,
        Err(e) => return Err(fail(ctx, format!("new plan cannot be modelled: {e}"))),
    };
    let mut full = ctx.executed().to_vec();
    full.extend(plan.total_order.iter().copied());
    let hash = actions_hash(&spec, &full);
    let (archive, _) = synthesize(&model, &ctx.options.ga, hash)?;
    let entry: ArchiveEntry = match select_new_plan(&archive.entries) {
        Ok(e) => e.clone(),
        Err(_) => {
            let why = archive.diagnostic.clone().unwrap_or_else(|| "no feasible retry assignment".into());
            return Err(fail(ctx, why));
        }
    };
    let travel = ctx.world.travel_cost;
    ctx.world = WorldState { travel_cost: travel, ..WorldState::initial(&spec)? };
    ctx.spec = spec;
    ctx.plan = full;
    ctx.archive = archive.entries;
    ctx.deploy(&entry);
    ctx.record_stages(&Level::A3.stages());
    Ok(AdaptationOutcome {
        time: change.time(),
        change: change.clone(),
        level: Level::A3,
        new_assignment: Some(ctx.budgets.clone()),
        new_plan: Some(ctx.plan.iter().map(|a| a.display(&ctx.spec).to_string()).collect()),
        stages_rerun: Level::A3.stages(),
        reduced_set_size: 0,
    })
}
