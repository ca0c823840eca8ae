use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::PmcError;

/// Explicit discrete-time Markov chain with transition rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct Dtmc {
    pub initial: usize,
    /// Outgoing distribution of each state as (successor, probability).
    pub rows: Vec<Vec<(usize, f64)>>,
    /// State sets by label name.
    pub labels: BTreeMap<String, Vec<bool>>,
    /// Transition rewards by structure name, aligned with `rows`.
    pub rewards: BTreeMap<String, Vec<Vec<f64>>>,
}

pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

impl Dtmc {
    pub fn new(initial: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        Dtmc { initial, rows, labels: BTreeMap::new(), rewards: BTreeMap::new() }
    }

    pub fn num_states(&self) -> usize {
        self.rows.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn add_label(&mut self, name: &str, states: impl IntoIterator<Item = usize>) {
        let mut v = vec![false; self.rows.len()];
        for s in states {
            v[s] = true;
        }
        self.labels.insert(name.to_string(), v);
    }

    pub fn label(&self, name: &str) -> Result<&[bool], PmcError> {
        self.labels.get(name).map(Vec::as_slice).ok_or_else(|| PmcError::UnknownLabel(name.to_string()))
    }

    pub fn reward(&self, name: &str) -> Result<&[Vec<f64>], PmcError> {
        self.rewards.get(name).map(Vec::as_slice).ok_or_else(|| PmcError::UnknownReward(name.to_string()))
    }

    /// Checks that every row is a distribution and every reward structure
    /// matches the transition layout.
    pub fn check(&self) -> Result<(), PmcError> {
        if self.initial >= self.rows.len() {
            return Err(PmcError::Malformed(format!("initial state {} out of range", self.initial)));
        }
        for (s, row) in self.rows.iter().enumerate() {
            if row.is_empty() {
                return Err(PmcError::NonStochastic { state: s, sum: 0.0 });
            }
            let mut sum = 0.0;
            for &(t, p) in row {
                if t >= self.rows.len() || !(0.0..=1.0 + STOCHASTIC_TOLERANCE).contains(&p) {
                    return Err(PmcError::Malformed(format!("bad transition {s} -> {t} ({p})")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE * row.len().max(1) as f64 {
                return Err(PmcError::NonStochastic { state: s, sum });
            }
        }
        for (name, r) in &self.rewards {
            if r.len() != self.rows.len() || r.iter().zip(&self.rows).any(|(a, b)| a.len() != b.len()) {
                return Err(PmcError::Malformed(format!("reward structure '{name}' does not match transitions")));
            }
        }
        for (name, l) in &self.labels {
            if l.len() != self.rows.len() {
                return Err(PmcError::Malformed(format!("label '{name}' has wrong length")));
            }
        }
        Ok(())
    }

    /// States reachable from the initial state.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.rows.len()];
        let mut stack = vec![self.initial];
        seen[self.initial] = true;
        while let Some(s) = stack.pop() {
            for &(t, p) in &self.rows[s] {
                if p > 0.0 && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }

    /// A state whose only successor is itself.
    pub fn is_absorbing(&self, s: usize) -> bool {
        self.rows[s].iter().all(|&(t, p)| t == s || p == 0.0)
    }

    /// Tab-separated transition list: `src dst prob reward`, one line per
    /// transition (reward column from the named structure, 0 if absent).
    pub fn export_transitions(&self, reward: &str) -> String {
        let rew = self.rewards.get(reward);
        let mut out = String::from("src\tdst\tprob\treward\n");
        for (s, row) in self.rows.iter().enumerate() {
            for (i, &(t, p)) in row.iter().enumerate() {
                let r = rew.map_or(0.0, |r| r[s][i]);
                let _ = writeln!(out, "{s}\t{t}\t{p}\t{r}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_rejects_bad_rows() {
        let d = Dtmc::new(0, vec![vec![(0, 0.5)]]);
        assert!(matches!(d.check(), Err(PmcError::NonStochastic { .. })));
        let d = Dtmc::new(0, vec![vec![(0, 1.0)]]);
        assert!(d.check().is_ok());
        assert!(d.is_absorbing(0));
    }

    #[test]
    fn export_lists_transitions() {
        let mut d = Dtmc::new(0, vec![vec![(1, 0.25), (2, 0.75)], vec![(1, 1.0)], vec![(2, 1.0)]]);
        d.rewards.insert("cost".into(), vec![vec![2.0, 2.0], vec![0.0], vec![0.0]]);
        let text = d.export_transitions("cost");
        assert_eq!(text.lines().count(), 5);
        assert!(text.contains("0\t2\t0.75\t2\n"));
    }
}
