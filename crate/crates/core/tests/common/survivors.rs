//! Checks on the verified-plan set left by an adaptation.

use std::collections::BTreeMap;

use hytask::adapt::{ExecutionContext, Level};

/// Closed-form (p, cost) of the rest of the mission under `retries`.
pub fn remaining_oracle(ctx: &ExecutionContext, retries: &BTreeMap<String, u32>) -> (f64, f64) {
    super::closed_form(&ctx.spec, &ctx.plan[ctx.cursor..], retries, &ctx.consumed())
}

/// What must hold of the set after any adaptation: the deployed entry is
/// in it, every entry allows for the failures seen so far, and fresh
/// entries (A2, A3) score as the closed form says and meet the floor.
pub fn check_survivors(ctx: &ExecutionContext, level: Level) {
    assert!(!ctx.archive.is_empty());
    assert!(ctx.archive.iter().any(|e| e.retries == ctx.deployed.retries), "deployed entry not in the set");
    for e in &ctx.archive {
        assert!(ctx.is_consistent(e), "{:?} ignores observed failures", e.retries);
        assert!(e.objectives.feasible);
        if matches!(level, Level::A2 | Level::A3) {
            let (p, c) = remaining_oracle(ctx, &e.retries);
            assert!((p - e.objectives.success_prob).abs() < 1e-9, "{p} vs {}", e.objectives.success_prob);
            assert!((c - e.objectives.expected_cost).abs() < 1e-9, "{c} vs {}", e.objectives.expected_cost);
            assert!(p >= ctx.spec.constraints().p_succ);
        }
    }
    for &(a, t) in ctx.consumed().keys() {
        assert!(ctx.failures_of(a, t) < ctx.budget(a, t));
    }
}
