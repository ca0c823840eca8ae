use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Dtmc, PmcError, COST, SUCCESS};

const BLOCK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub runs: usize,
    pub successes: usize,
    pub success_prob: f64,
    pub mean_cost: f64,
}

impl MonteCarloEstimate {
    /// Binomial standard error of the success estimate at probability `p`.
    pub fn sigma(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }
}

struct Sampler {
    /// Cumulative probabilities per state.
    cum: Vec<Vec<f64>>,
    succ: Vec<bool>,
    absorbing: Vec<bool>,
}

impl Sampler {
    fn new(d: &Dtmc) -> Result<Self, PmcError> {
        d.check()?;
        let cum = d
            .rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter().map(|(_, p)| {
                    acc += p;
                    acc
                }).collect()
            })
            .collect();
        Ok(Sampler {
            cum,
            succ: d.label(SUCCESS)?.to_vec(),
            absorbing: (0..d.num_states()).map(|s| d.is_absorbing(s)).collect(),
        })
    }
}

/// Simulates the independent chains `runs` times; a run succeeds when every
/// chain is absorbed in a success state. Each block of runs has its own
/// stream of one seeded generator, so results do not depend on the thread
/// count.
pub fn simulate_chains(chains: &[Dtmc], runs: usize, seed: u64) -> Result<MonteCarloEstimate, PmcError> {
    let samplers: Vec<Sampler> = chains.iter().map(Sampler::new).collect::<Result<_, _>>()?;
    let costs: Vec<&[Vec<f64>]> = chains.iter().map(|c| c.reward(COST)).collect::<Result<_, _>>()?;
    let blocks = runs.div_ceil(BLOCK);
    let per_block: Vec<(usize, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let n = BLOCK.min(runs - b * BLOCK);
            let mut ok = 0usize;
            let mut cost = 0.0;
            for _ in 0..n {
                let mut all = true;
                for (ci, (sm, d)) in samplers.iter().zip(chains).enumerate() {
                    let mut s = d.initial;
                    while !sm.absorbing[s] {
                        let u: f64 = rng.gen();
                        let row = &sm.cum[s];
                        let k = row.iter().position(|c| u < *c).unwrap_or(row.len() - 1);
                        cost += costs[ci][s][k];
                        s = d.rows[s][k].0;
                    }
                    all &= sm.succ[s];
                }
                ok += all as usize;
            }
            (ok, cost)
        })
        .collect();
    let successes: usize = per_block.iter().map(|b| b.0).sum();
    let total: f64 = per_block.iter().map(|b| b.1).sum();
    Ok(MonteCarloEstimate {
        runs,
        successes,
        success_prob: successes as f64 / runs.max(1) as f64,
        mean_cost: total / runs.max(1) as f64,
    })
}
