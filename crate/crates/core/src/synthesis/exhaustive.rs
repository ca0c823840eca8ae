use rayon::prelude::*;

use super::nsga2::all_genotypes;
use super::{evaluate_objectives, Objectives, ParetoArchive, SynthesisError};
use crate::uncertainty::{ParametricPlanModel, RetryAssignment};

/// Evaluates every genotype. Refuses spaces larger than `limit`.
pub fn exhaustive_synthesize(
    model: &ParametricPlanModel,
    limit: u128,
    plan_hash: String,
) -> Result<(ParetoArchive, Vec<(RetryAssignment, Objectives)>), SynthesisError> {
    let size = model.space_size();
    if size > limit {
        return Err(SynthesisError::SpaceTooLarge { size, limit });
    }
    let all: Vec<RetryAssignment> = all_genotypes(model).collect();
    let objs: Vec<Objectives> = all.par_iter().map(|g| evaluate_objectives(model, g)).collect::<Result<_, _>>()?;
    let log: Vec<(RetryAssignment, Objectives)> = all.into_iter().zip(objs).collect();
    Ok((ParetoArchive::from_evaluations(model, plan_hash, &log), log))
}
