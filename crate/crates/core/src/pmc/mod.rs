//! Exact analysis of explicit Markov models.

mod dtmc;
mod mdp;
mod montecarlo;
mod product;
mod solve;

pub use dtmc::{Dtmc, STOCHASTIC_TOLERANCE};
pub use mdp::{mdp_max_reach_prob, mdp_max_reach_probs, mdp_min_bounded_reward, Choice, Mdp};
pub use montecarlo::{simulate_chains, MonteCarloEstimate};
pub use product::compose_product;
pub use solve::{
    expected_reward, expected_reward_with, prob01, reach_probabilities, reach_probability, reach_probability_sweeps,
    reach_probability_with, SolverOptions,
};

use serde::{Deserialize, Serialize};

/// Label of the states where a chain (or the whole mission) has succeeded.
pub const SUCCESS: &str = "success";
/// Label of the absorbing states, successful or failed.
pub const DONE: &str = "done";
/// Name of the transition-reward structure.
pub const COST: &str = "cost";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PmcError {
    #[error("state {state}: outgoing probabilities sum to {sum}")]
    NonStochastic { state: usize, sum: f64 },
    #[error("unknown label '{0}'")]
    UnknownLabel(String),
    #[error("label '{0}' holds in no state")]
    EmptyTarget(String),
    #[error("unknown reward structure '{0}'")]
    UnknownReward(String),
    #[error("expected reward is infinite: state {state} misses the target with positive probability")]
    InfiniteReward { state: usize },
    #[error("iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("singular linear system")]
    Singular,
    #[error("state budget of {budget} exceeded")]
    StateBudgetExceeded { budget: usize },
    #[error("malformed model: {0}")]
    Malformed(String),
}

/// Mission-level success probability and expected cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionMetrics {
    pub success_prob: f64,
    pub expected_cost: f64,
}

/// Metrics of one chain: P=? [F success] and R{cost}=? [F done].
pub fn chain_metrics(d: &Dtmc) -> Result<MissionMetrics, PmcError> {
    chain_metrics_with(d, &SolverOptions::default())
}

pub fn chain_metrics_with(d: &Dtmc, opts: &SolverOptions) -> Result<MissionMetrics, PmcError> {
    Ok(MissionMetrics {
        success_prob: reach_probability_with(d, SUCCESS, opts)?,
        expected_cost: expected_reward_with(d, COST, DONE, opts)?,
    })
}

/// Mission metrics of independent chains: the success probability is the
/// product and the expected cost the sum of the per-chain values.
pub fn factored_metrics(chains: &[Dtmc]) -> Result<MissionMetrics, PmcError> {
    factored_metrics_with(chains, &SolverOptions::default())
}

pub fn factored_metrics_with(chains: &[Dtmc], opts: &SolverOptions) -> Result<MissionMetrics, PmcError> {
    let mut m = MissionMetrics { success_prob: 1.0, expected_cost: 0.0 };
    for c in chains {
        let cm = chain_metrics_with(c, opts)?;
        m.success_prob *= cm.success_prob;
        m.expected_cost += cm.expected_cost;
    }
    Ok(m)
}
