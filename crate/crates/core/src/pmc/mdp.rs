use std::collections::BTreeMap;

use super::{PmcError, SolverOptions, STOCHASTIC_TOLERANCE};

/// One nondeterministic choice: a named action with its distribution.
/// Each edge is (successor, probability, reward).
#[derive(Clone, Debug, PartialEq)]
pub struct Choice {
    pub action: String,
    pub edges: Vec<(usize, f64, f64)>,
}

/// Explicit Markov decision process with a single transition-reward
/// structure.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mdp {
    pub initial: usize,
    pub choices: Vec<Vec<Choice>>,
    pub labels: BTreeMap<String, Vec<bool>>,
}

impl Mdp {
    pub fn num_states(&self) -> usize {
        self.choices.len()
    }

    pub fn num_choices(&self) -> usize {
        self.choices.iter().map(Vec::len).sum()
    }

    pub fn num_transitions(&self) -> usize {
        self.choices.iter().flatten().map(|c| c.edges.len()).sum()
    }

    pub fn label(&self, name: &str) -> Result<&[bool], PmcError> {
        self.labels.get(name).map(Vec::as_slice).ok_or_else(|| PmcError::UnknownLabel(name.to_string()))
    }

    pub fn check(&self) -> Result<(), PmcError> {
        if self.initial >= self.num_states() {
            return Err(PmcError::Malformed("initial state out of range".into()));
        }
        for (s, cs) in self.choices.iter().enumerate() {
            if cs.is_empty() {
                return Err(PmcError::Malformed(format!("state {s} has no enabled action")));
            }
            for c in cs {
                let sum: f64 = c.edges.iter().map(|e| e.1).sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE * c.edges.len().max(1) as f64 {
                    return Err(PmcError::NonStochastic { state: s, sum });
                }
                if c.edges.iter().any(|e| e.0 >= self.num_states()) {
                    return Err(PmcError::Malformed(format!("state {s}: successor out of range")));
                }
            }
        }
        Ok(())
    }
}

/// Pmax=? [ F label ] by value iteration from below, after removing states
/// that cannot reach the target under any policy.
pub fn mdp_max_reach_prob(m: &Mdp, label: &str, opts: &SolverOptions) -> Result<f64, PmcError> {
    Ok(mdp_max_reach_probs(m, label, opts)?[m.initial])
}

pub fn mdp_max_reach_probs(m: &Mdp, label: &str, opts: &SolverOptions) -> Result<Vec<f64>, PmcError> {
    m.check()?;
    let goal = m.label(label)?;
    let n = m.num_states();
    let can = can_reach(m, goal);
    let mut x: Vec<f64> = goal.iter().map(|g| if *g { 1.0 } else { 0.0 }).collect();
    for _ in 0..opts.max_sweeps {
        let mut delta = 0.0f64;
        for s in 0..n {
            if goal[s] || !can[s] {
                continue;
            }
            let best = m.choices[s]
                .iter()
                .map(|c| c.edges.iter().map(|&(t, p, _)| p * x[t]).sum::<f64>())
                .fold(0.0, f64::max);
            delta = delta.max(best - x[s]);
            x[s] = best;
        }
        if delta < opts.tolerance {
            return Ok(x);
        }
    }
    Err(PmcError::NoConvergence { sweeps: opts.max_sweeps })
}

fn can_reach(m: &Mdp, goal: &[bool]) -> Vec<bool> {
    let n = m.num_states();
    let mut pred = vec![Vec::new(); n];
    for (s, cs) in m.choices.iter().enumerate() {
        for c in cs {
            for &(t, p, _) in &c.edges {
                if p > 0.0 {
                    pred[t].push(s);
                }
            }
        }
    }
    let mut seen = goal.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|s| goal[*s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !seen[s] {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// Rmin=? [ C<=k ]: minimal expected reward accumulated in the first `k`
/// steps, by backward induction.
pub fn mdp_min_bounded_reward(m: &Mdp, k: usize) -> Result<f64, PmcError> {
    m.check()?;
    let n = m.num_states();
    let mut v = vec![0.0; n];
    let mut next = vec![0.0; n];
    for _ in 0..k {
        for (s, out) in next.iter_mut().enumerate() {
            *out = m.choices[s]
                .iter()
                .map(|c| c.edges.iter().map(|&(t, p, r)| p * (r + v[t])).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
        }
        std::mem::swap(&mut v, &mut next);
    }
    Ok(v[m.initial])
}

#[cfg(test)]
mod tests {
    use super::*;

    /// One task, done either by the worker (p .99, cost 5) or the robot
    /// (p .97, cost 1), single attempt.
    fn who_does_t3() -> Mdp {
        let choice = |name: &str, p: f64, cost: f64| Choice { action: name.into(), edges: vec![(1, p, cost), (2, 1.0 - p, cost)] };
        let absorb = |s| vec![Choice { action: "stay".into(), edges: vec![(s, 1.0, 0.0)] }];
        let mut labels = BTreeMap::new();
        labels.insert("success".into(), vec![false, true, false]);
        labels.insert("done".into(), vec![false, true, true]);
        Mdp { initial: 0, choices: vec![vec![choice("worker", 0.99, 5.0), choice("robot", 0.97, 1.0)], absorb(1), absorb(2)], labels }
    }

    #[test]
    fn max_picks_the_worker() {
        let m = who_does_t3();
        let p = mdp_max_reach_prob(&m, "success", &SolverOptions::default()).unwrap();
        assert!((p - 0.99).abs() < 1e-12);
    }

    #[test]
    fn bounded_reward() {
        let m = who_does_t3();
        assert_eq!(mdp_min_bounded_reward(&m, 0).unwrap(), 0.0);
        assert_eq!(mdp_min_bounded_reward(&m, 20).unwrap(), 1.0);
        let mut zero = m.clone();
        for cs in &mut zero.choices {
            for c in cs {
                for e in &mut c.edges {
                    e.2 = 0.0;
                }
            }
        }
        assert_eq!(mdp_min_bounded_reward(&zero, 20).unwrap(), 0.0);
    }

    #[test]
    fn stateless_action_is_rejected() {
        let mut m = who_does_t3();
        m.choices[1].clear();
        assert!(m.check().is_err());
    }
}
