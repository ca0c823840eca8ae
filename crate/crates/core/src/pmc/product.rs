use std::collections::HashMap;

use super::{Dtmc, PmcError, COST, DONE, SUCCESS};

/// Interleaving product of independent chains.
///
/// In every product state exactly one component moves: the non-absorbed
/// component with the lowest local state index (ties to the lower chain
/// index). Local state indices grow along each chain, so this is a fair,
/// deterministic schedule and no turn variable is needed. Once every
/// component is absorbed the product state self-loops.
pub fn compose_product(chains: &[Dtmc], budget: usize) -> Result<Dtmc, PmcError> {
    for c in chains {
        c.check()?;
    }
    let absorbing: Vec<Vec<bool>> =
        chains.iter().map(|c| (0..c.num_states()).map(|s| c.is_absorbing(s)).collect()).collect();
    let labels: Vec<(&[bool], &[bool])> =
        chains.iter().map(|c| Ok((c.label(SUCCESS)?, c.label(DONE)?))).collect::<Result<_, PmcError>>()?;
    let costs: Vec<Option<&Vec<Vec<f64>>>> = chains.iter().map(|c| c.rewards.get(COST)).collect();

    let start: Vec<usize> = chains.iter().map(|c| c.initial).collect();
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut states = vec![start.clone()];
    index.insert(start, 0);
    let mut rows = Vec::new();
    let mut rewards = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let cur = states[next].clone();
        next += 1;
        let mover = (0..chains.len())
            .filter(|&i| !absorbing[i][cur[i]])
            .min_by_key(|&i| (cur[i], i));
        let Some(i) = mover else {
            rows.push(vec![(next - 1, 1.0)]);
            rewards.push(vec![0.0]);
            continue;
        };
        let mut row = Vec::new();
        let mut rew = Vec::new();
        for (k, &(t, p)) in chains[i].rows[cur[i]].iter().enumerate() {
            let mut succ = cur.clone();
            succ[i] = t;
            let id = match index.get(&succ) {
                Some(&id) => id,
                None => {
                    if states.len() >= budget {
                        return Err(PmcError::StateBudgetExceeded { budget });
                    }
                    let id = states.len();
                    index.insert(succ.clone(), id);
                    states.push(succ);
                    id
                }
            };
            row.push((id, p));
            rew.push(costs[i].map_or(0.0, |c| c[cur[i]][k]));
        }
        rows.push(row);
        rewards.push(rew);
    }
    let mut d = Dtmc::new(0, rows);
    let all = |f: &dyn Fn(usize, usize) -> bool| -> Vec<usize> {
        states.iter().enumerate().filter(|(_, st)| st.iter().enumerate().all(|(i, s)| f(i, *s))).map(|(k, _)| k).collect()
    };
    let succ = all(&|i, s| labels[i].0[s]);
    let done = all(&|i, s| labels[i].1[s]);
    d.add_label(SUCCESS, succ);
    d.add_label(DONE, done);
    d.rewards.insert(COST.to_string(), rewards);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmc::{factored_metrics, chain_metrics};

    /// 0 -p-> 1 (success), else 2 (fail); cost c on both edges.
    fn step(p: f64, c: f64) -> Dtmc {
        let mut d = Dtmc::new(0, vec![vec![(1, p), (2, 1.0 - p)], vec![(1, 1.0)], vec![(2, 1.0)]]);
        d.add_label(SUCCESS, [1]);
        d.add_label(DONE, [1, 2]);
        d.rewards.insert(COST.into(), vec![vec![c, c], vec![0.0], vec![0.0]]);
        d
    }

    #[test]
    fn two_three_state_chains() {
        let chains = [step(0.9, 2.0), step(0.8, 3.0)];
        let prod = compose_product(&chains, 100).unwrap();
        assert!(prod.num_states() <= 9);
        let f = factored_metrics(&chains).unwrap();
        let p = chain_metrics(&prod).unwrap();
        assert!((f.success_prob - p.success_prob).abs() < 1e-12);
        assert!((f.expected_cost - p.expected_cost).abs() < 1e-12);
        assert!((p.success_prob - 0.72).abs() < 1e-12);
    }

    #[test]
    fn single_chain_is_itself() {
        let c = step(0.97, 1.0);
        let prod = compose_product(std::slice::from_ref(&c), 10).unwrap();
        assert_eq!(prod, c);
    }

    #[test]
    fn budget_is_enforced() {
        let chains = [step(0.9, 2.0), step(0.8, 3.0)];
        assert!(matches!(compose_product(&chains, 3), Err(PmcError::StateBudgetExceeded { budget: 3 })));
    }
}
