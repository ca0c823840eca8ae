//! Multi-objective search over retry budgets: minimise expected cost,
//! maximise mission success, subject to the success floor.

mod archive;
mod exhaustive;
mod nsga2;

use serde::{Deserialize, Serialize};

use crate::uncertainty::{evaluate, ModelError, ParametricPlanModel, RetryAssignment};

pub use archive::{actions_hash, plan_hash, ArchiveEntry, ParetoArchive};
pub use exhaustive::exhaustive_synthesize;
pub use nsga2::{synthesize, GaConfig};

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("genotype space of {size} exceeds the limit of {limit}")]
    SpaceTooLarge { size: u128, limit: u128 },
    #[error("invalid search configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("malformed archive document: {0}")]
    Document(String),
}

/// Objective values of one genotype.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    /// Minimised.
    pub expected_cost: f64,
    /// Maximised.
    pub success_prob: f64,
    /// Meets the mission success floor.
    pub feasible: bool,
    /// Shortfall below the floor, zero when feasible.
    pub violation: f64,
}

impl Objectives {
    pub fn new(expected_cost: f64, success_prob: f64, p_succ: f64) -> Self {
        let violation = (p_succ - success_prob).max(0.0);
        Objectives { expected_cost, success_prob, feasible: violation == 0.0, violation }
    }
}

/// Evaluates a genotype through the verification engine.
pub fn evaluate_objectives(model: &ParametricPlanModel, a: &RetryAssignment) -> Result<Objectives, ModelError> {
    let m = evaluate(model, a)?;
    Ok(Objectives::new(m.expected_cost, m.success_prob, model.p_succ))
}

/// Constrained dominance: a feasible point beats an infeasible one, two
/// infeasible points compare by violation, two feasible points by Pareto
/// dominance on (cost, success).
pub fn dominates(a: &Objectives, b: &Objectives) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.violation < b.violation,
        (true, true) => pareto_dominates(a, b),
    }
}

/// Plain Pareto dominance, ignoring feasibility.
pub fn pareto_dominates(a: &Objectives, b: &Objectives) -> bool {
    a.expected_cost <= b.expected_cost
        && a.success_prob >= b.success_prob
        && (a.expected_cost < b.expected_cost || a.success_prob > b.success_prob)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o(cost: f64, p: f64, floor: f64) -> Objectives {
        Objectives::new(cost, p, floor)
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&o(10.0, 0.99, 0.95), &o(12.0, 0.98, 0.95)));
        // feasibility first
        assert!(!dominates(&o(10.0, 0.94, 0.95), &o(50.0, 0.96, 0.95)));
        assert!(dominates(&o(50.0, 0.96, 0.95), &o(10.0, 0.94, 0.95)));
        let a = o(10.0, 0.97, 0.95);
        assert!(!dominates(&a, &a));
        // infeasible pair by violation
        assert!(dominates(&o(99.0, 0.94, 0.95), &o(1.0, 0.90, 0.95)));
    }

    #[test]
    fn feasibility_matches_violation() {
        let f = o(1.0, 0.95, 0.95);
        assert!(f.feasible);
        assert_eq!(f.violation, 0.0);
        let g = o(1.0, 0.9, 0.95);
        assert!(!g.feasible && g.violation > 0.0);
    }
}
