use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{pareto_dominates, GaConfig, Objectives, SynthesisError};
use crate::planner::Plan;
use crate::spec::ProblemSpec;
use crate::uncertainty::{ParametricPlanModel, RetryAssignment};
use crate::world::Action;

/// SHA-256 of the plan's action list, hex encoded.
pub fn plan_hash(spec: &ProblemSpec, plan: &Plan) -> String {
    actions_hash(spec, &plan.total_order)
}

/// SHA-256 of an action sequence, hex encoded.
pub fn actions_hash(spec: &ProblemSpec, actions: &[Action]) -> String {
    let mut h = Sha256::new();
    for a in actions {
        h.update(a.display(spec).to_string().as_bytes());
        h.update(b"\n");
    }
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(out, "{b:02x}");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub genotype: RetryAssignment,
    pub objectives: Objectives,
    /// Task id → attempt budget.
    pub retries: BTreeMap<String, u32>,
}

/// Pareto set and front of one synthesis run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    pub plan_hash: String,
    /// Task ids of the genotype positions.
    pub slots: Vec<String>,
    /// Every feasible genotype attaining a non-dominated point, sorted by
    /// (cost, -success, genotype).
    pub entries: Vec<ArchiveEntry>,
    /// Distinct non-dominated (cost, success) points, by increasing cost.
    pub front: Vec<(f64, f64)>,
    pub evaluations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<GaConfig>,
    /// Set when no feasible genotype was found.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl ParetoArchive {
    /// Builds the archive from an evaluation log.
    pub fn from_evaluations(
        model: &ParametricPlanModel,
        plan_hash: String,
        log: &[(RetryAssignment, Objectives)],
    ) -> ParetoArchive {
        let feasible: Vec<&(RetryAssignment, Objectives)> = log.iter().filter(|(_, o)| o.feasible).collect();
        let mut entries: Vec<ArchiveEntry> = feasible
            .iter()
            .filter(|(_, o)| !feasible.iter().any(|(_, q)| pareto_dominates(q, o)))
            .map(|(g, o)| ArchiveEntry { genotype: g.clone(), objectives: *o, retries: model.to_dict(g) })
            .collect();
        entries.sort_by(|a, b| {
            a.objectives
                .expected_cost
                .total_cmp(&b.objectives.expected_cost)
                .then(b.objectives.success_prob.total_cmp(&a.objectives.success_prob))
                .then_with(|| a.genotype.cmp(&b.genotype))
        });
        entries.dedup_by(|a, b| a.genotype == b.genotype);
        let mut front: Vec<(f64, f64)> =
            entries.iter().map(|e| (e.objectives.expected_cost, e.objectives.success_prob)).collect();
        front.dedup();
        let diagnostic = if entries.is_empty() {
            let best = log.iter().map(|(_, o)| o.success_prob).fold(f64::NAN, f64::max);
            Some(format!(
                "no feasible retry assignment among {} evaluated; best success probability {best} < {}",
                log.len(),
                model.p_succ
            ))
        } else {
            None
        };
        ParetoArchive {
            plan_hash,
            slots: model.slots.iter().map(|s| s.task_id.clone()).collect(),
            entries,
            front,
            evaluations: log.len(),
            seed: None,
            config: None,
            diagnostic,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("archives always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, SynthesisError> {
        serde_json::from_str(text).map_err(|e| SynthesisError::Document(e.to_string()))
    }

    /// `cost,success_prob` lines for plotting.
    pub fn front_csv(&self) -> String {
        let mut s = String::from("expected_cost,success_prob\n");
        for (c, p) in &self.front {
            let _ = writeln!(s, "{c},{p}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planner::vineyard_reference_plan;

    #[test]
    fn hash_is_stable_and_plan_specific() {
        let spec = fixtures::vineyard();
        let plan = vineyard_reference_plan(&spec);
        let h = plan_hash(&spec, &plan);
        assert_eq!(h.len(), 64);
        assert_eq!(h, plan_hash(&spec, &plan));
        let mut other = plan.clone();
        other.total_order.pop();
        assert_ne!(h, plan_hash(&spec, &other));
    }
}
