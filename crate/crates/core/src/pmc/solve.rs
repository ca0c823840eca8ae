//! Reachability probabilities and expected reachability rewards on DTMCs.
//!
//! After the usual graph precomputation (states that reach the target with
//! probability 0 or 1), the remaining unknowns are solved one strongly
//! connected component at a time in reverse topological order. Acyclic
//! parts cost one back-substitution each; larger components use dense
//! Gaussian elimination, or Gauss–Seidel past `dense_limit` states.

use super::{Dtmc, PmcError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Absolute convergence tolerance for iterative solving.
    pub tolerance: f64,
    /// Largest component solved by direct elimination.
    pub dense_limit: usize,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tolerance: 1e-10, dense_limit: 2000, max_sweeps: 1_000_000 }
    }
}

/// P=? [ F target ] from the initial state.
pub fn reach_probability(d: &Dtmc, target: &str) -> Result<f64, PmcError> {
    reach_probability_with(d, target, &SolverOptions::default())
}

pub fn reach_probability_with(d: &Dtmc, target: &str, opts: &SolverOptions) -> Result<f64, PmcError> {
    Ok(reach_probabilities(d, target, opts)?[d.initial])
}

/// Reachability probability for every state.
pub fn reach_probabilities(d: &Dtmc, target: &str, opts: &SolverOptions) -> Result<Vec<f64>, PmcError> {
    d.check()?;
    let goal = d.label(target)?;
    if !goal.iter().any(|g| *g) {
        return Err(PmcError::EmptyTarget(target.to_string()));
    }
    let (no, yes) = prob01(d, goal);
    let n = d.num_states();
    let mut x = vec![0.0; n];
    let mut unknown = vec![false; n];
    for s in 0..n {
        if yes[s] {
            x[s] = 1.0;
        } else if !no[s] {
            unknown[s] = true;
        }
    }
    // b_s = probability of stepping straight into a yes-state
    let b: Vec<f64> = (0..n)
        .map(|s| if unknown[s] { d.rows[s].iter().filter(|(t, _)| yes[*t]).map(|(_, p)| p).sum() } else { 0.0 })
        .collect();
    solve_linear(d, &unknown, &b, &mut x, opts)?;
    Ok(x)
}

/// R{reward}=? [ F target ]: expected reward accumulated until the target
/// is first reached. Fails if some reachable state misses the target with
/// positive probability.
pub fn expected_reward(d: &Dtmc, reward: &str, target: &str) -> Result<f64, PmcError> {
    expected_reward_with(d, reward, target, &SolverOptions::default())
}

pub fn expected_reward_with(d: &Dtmc, reward: &str, target: &str, opts: &SolverOptions) -> Result<f64, PmcError> {
    d.check()?;
    let goal = d.label(target)?;
    let rew = d.reward(reward)?;
    let (_, yes) = prob01(d, goal);
    let reach = d.reachable();
    if let Some(s) = (0..d.num_states()).find(|s| reach[*s] && !yes[*s]) {
        return Err(PmcError::InfiniteReward { state: s });
    }
    let n = d.num_states();
    let unknown: Vec<bool> = (0..n).map(|s| reach[s] && !goal[s]).collect();
    let b: Vec<f64> = (0..n)
        .map(|s| if unknown[s] { d.rows[s].iter().zip(&rew[s]).map(|((_, p), r)| p * r).sum() } else { 0.0 })
        .collect();
    let mut x = vec![0.0; n];
    solve_linear(d, &unknown, &b, &mut x, opts)?;
    Ok(x[d.initial])
}

/// Returns (prob0, prob1) state sets for reaching `goal`.
pub fn prob01(d: &Dtmc, goal: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let n = d.num_states();
    let pred = predecessors(d);
    // can reach goal
    let can = backward(&pred, n, goal, |_| true);
    let no: Vec<bool> = can.iter().map(|c| !c).collect();
    // can reach a no-state while avoiding the goal
    let bad = backward(&pred, n, &no, |s| !goal[s]);
    let yes: Vec<bool> = (0..n).map(|s| !bad[s]).collect();
    (no, yes)
}

fn predecessors(d: &Dtmc) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); d.num_states()];
    for (s, row) in d.rows.iter().enumerate() {
        for &(t, p) in row {
            if p > 0.0 {
                pred[t].push(s);
            }
        }
    }
    pred
}

/// States that can reach `from` through states satisfying `through`.
fn backward(pred: &[Vec<usize>], n: usize, from: &[bool], through: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = from.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|s| from[*s]).collect();
    while let Some(t) = stack.pop() {
        for &s in &pred[t] {
            if !seen[s] && through(s) {
                seen[s] = true;
                stack.push(s);
            }
        }
    }
    seen
}

/// Solves x_s = b_s + Σ_{t unknown} P(s,t) x_t for every unknown state s,
/// leaving known entries of `x` untouched (known entries contribute through
/// `b` already and are only read as zero here).
fn solve_linear(d: &Dtmc, unknown: &[bool], b: &[f64], x: &mut [f64], opts: &SolverOptions) -> Result<(), PmcError> {
    let sccs = tarjan(d, unknown);
    let n = d.num_states();
    let mut comp_of = vec![usize::MAX; n];
    for (ci, comp) in sccs.iter().enumerate() {
        for &s in comp {
            comp_of[s] = ci;
        }
    }
    let mut solved = vec![false; n];
    for (ci, comp) in sccs.iter().enumerate() {
        // constant part: b plus contributions from already solved unknowns
        let rhs: Vec<f64> = comp
            .iter()
            .map(|&s| {
                b[s] + d.rows[s]
                    .iter()
                    .filter(|(t, _)| unknown[*t] && comp_of[*t] != ci)
                    .map(|&(t, p)| {
                        debug_assert!(solved[t]);
                        p * x[t]
                    })
                    .sum::<f64>()
            })
            .collect();
        if comp.len() == 1 {
            let s = comp[0];
            let self_p: f64 = d.rows[s].iter().filter(|(t, _)| *t == s).map(|(_, p)| p).sum();
            if self_p >= 1.0 {
                return Err(PmcError::Singular);
            }
            x[s] = rhs[0] / (1.0 - self_p);
        } else if comp.len() <= opts.dense_limit {
            dense_solve(d, comp, &comp_of, ci, &rhs, x)?;
        } else {
            gauss_seidel(d, comp, &comp_of, ci, &rhs, x, opts)?;
        }
        for &s in comp {
            solved[s] = true;
        }
    }
    Ok(())
}

fn dense_solve(
    d: &Dtmc,
    comp: &[usize],
    comp_of: &[usize],
    ci: usize,
    rhs: &[f64],
    x: &mut [f64],
) -> Result<(), PmcError> {
    let m = comp.len();
    let pos: std::collections::HashMap<usize, usize> = comp.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    // (I - P) x = rhs, row-major m × (m+1)
    let mut a = vec![0.0; m * (m + 1)];
    for (i, &s) in comp.iter().enumerate() {
        a[i * (m + 1) + i] = 1.0;
        for &(t, p) in &d.rows[s] {
            if comp_of[t] == ci {
                a[i * (m + 1) + pos[&t]] -= p;
            }
        }
        a[i * (m + 1) + m] = rhs[i];
    }
    let w = m + 1;
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i * w + col].abs().total_cmp(&a[j * w + col].abs()))
            .unwrap_or(col);
        if a[piv * w + col].abs() < 1e-300 {
            return Err(PmcError::Singular);
        }
        if piv != col {
            for k in 0..w {
                a.swap(piv * w + k, col * w + k);
            }
        }
        let inv = 1.0 / a[col * w + col];
        for row in 0..m {
            if row == col {
                continue;
            }
            let f = a[row * w + col] * inv;
            if f == 0.0 {
                continue;
            }
            for k in col..w {
                a[row * w + k] -= f * a[col * w + k];
            }
        }
    }
    for (i, &s) in comp.iter().enumerate() {
        x[s] = a[i * w + m] / a[i * w + i];
    }
    Ok(())
}

fn gauss_seidel(
    d: &Dtmc,
    comp: &[usize],
    comp_of: &[usize],
    ci: usize,
    rhs: &[f64],
    x: &mut [f64],
    opts: &SolverOptions,
) -> Result<(), PmcError> {
    for &s in comp {
        x[s] = 0.0;
    }
    for _ in 0..opts.max_sweeps {
        let mut delta = 0.0f64;
        for (i, &s) in comp.iter().enumerate() {
            let mut self_p = 0.0;
            let mut acc = rhs[i];
            for &(t, p) in &d.rows[s] {
                if t == s {
                    self_p += p;
                } else if comp_of[t] == ci {
                    acc += p * x[t];
                }
            }
            let v = acc / (1.0 - self_p);
            delta = delta.max((v - x[s]).abs());
            x[s] = v;
        }
        if delta < opts.tolerance {
            return Ok(());
        }
    }
    Err(PmcError::NoConvergence { sweeps: opts.max_sweeps })
}

/// Iterative Tarjan over the subgraph induced by `unknown`. Components come
/// out sinks first, which is the order the solver needs.
fn tarjan(d: &Dtmc, unknown: &[bool]) -> Vec<Vec<usize>> {
    let n = d.num_states();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0usize;
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if !unknown[root] || index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, i)) = call.last() {
            let row = &d.rows[v];
            if i < row.len() {
                let (w, p) = row[i];
                if let Some(top) = call.last_mut() {
                    top.1 += 1;
                }
                if p <= 0.0 || !unknown[w] {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

/// Value of the initial state after each Gauss–Seidel sweep of the plain
/// (unsplit) reachability iteration started from zero. Used to observe
/// monotone convergence.
pub fn reach_probability_sweeps(d: &Dtmc, target: &str, sweeps: usize) -> Result<Vec<f64>, PmcError> {
    d.check()?;
    let goal = d.label(target)?;
    let n = d.num_states();
    let mut x: Vec<f64> = goal.iter().map(|g| if *g { 1.0 } else { 0.0 }).collect();
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        for s in 0..n {
            if goal[s] {
                continue;
            }
            x[s] = d.rows[s].iter().map(|&(t, p)| p * x[t]).sum();
        }
        out.push(x[d.initial]);
    }
    Ok(out)
}
