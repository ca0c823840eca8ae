use super::{AdaptError, ExecutionContext, PsuccMode};
use crate::spec::{AgentIx, TaskIx};
use crate::synthesis::ArchiveEntry;

/// After a failed attempt at `task`: entries consistent with the progress,
/// which leaves each of them at least one more attempt at `task`.
pub fn reduce_ps_tf(ctx: &ExecutionContext, _task: TaskIx) -> Vec<ArchiveEntry> {
    ctx.consistent_entries()
}

/// Entries that still meet the success floor `p_succ`.
pub fn reduce_ps_psucc(ctx: &ExecutionContext, p_succ: f64) -> Result<Vec<ArchiveEntry>, AdaptError> {
    let mut out = Vec::new();
    for e in ctx.consistent_entries() {
        let p = match ctx.options.psucc_mode {
            PsuccMode::WholePlan => Some(e.objectives.success_prob),
            PsuccMode::Remaining => ctx.remaining_metrics(&e)?.map(|m| m.success_prob),
        };
        if p.is_some_and(|p| p >= p_succ) {
            out.push(e);
        }
    }
    Ok(out)
}

/// Empty as soon as some remaining task is allocated below `gamma`;
/// otherwise every consistent entry.
pub fn reduce_ps_passign(ctx: &ExecutionContext, gamma: f64) -> Vec<ArchiveEntry> {
    if ctx.remaining_allocations().iter().any(|&(a, t)| ctx.spec.p_success(a, t) < gamma) {
        return Vec::new();
    }
    ctx.consistent_entries()
}

/// Result of reducing on a success-probability change.
#[derive(Clone, Debug, PartialEq)]
pub enum PtaskReduction {
    /// The agent has no remaining attempt at the task.
    Unchanged(Vec<ArchiveEntry>),
    /// Re-verify and re-synthesize the remaining mission.
    Rebuild,
    /// The allocation is no longer admissible.
    Replan,
}

pub fn reduce_ps_ptask(ctx: &ExecutionContext, agent: AgentIx, task: TaskIx, p: f64) -> PtaskReduction {
    if !ctx.remaining_allocations().contains(&(agent, task)) {
        PtaskReduction::Unchanged(ctx.consistent_entries())
    } else if p <= ctx.spec.constraints().gamma {
        PtaskReduction::Replan
    } else {
        PtaskReduction::Rebuild
    }
}

/// Cheapest feasible entry, then the most reliable, then the smallest
/// genotype.
pub fn select_new_plan(set: &[ArchiveEntry]) -> Result<&ArchiveEntry, AdaptError> {
    set.iter()
        .filter(|e| e.objectives.feasible)
        .min_by(|a, b| {
            a.objectives
                .expected_cost
                .total_cmp(&b.objectives.expected_cost)
                .then(b.objectives.success_prob.total_cmp(&a.objectives.success_prob))
                .then_with(|| a.genotype.cmp(&b.genotype))
        })
        .ok_or(AdaptError::EmptySet)
}
