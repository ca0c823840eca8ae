//! Independent oracles shared by the integration tests. Nothing here calls
//! into the model checker, the synthesizer or the search code.

#![allow(dead_code)]

pub mod survivors;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use hytask::planner::Plan;
use hytask::spec::{AgentIx, ProblemSpec, SpecDocument, TaskIx};
use hytask::world::{apply, enabled_actions, is_goal, Action, WorldState};

/// Success probability and expected cost of independent per-agent retry
/// chains, straight from the geometric series.
///
/// A Do with success probability `p`, `b` total attempts and `f` attempts
/// already spent runs at most `b - f` more times: it succeeds with
/// `1 - (1-p)^(b-f)` and costs `cost * sum_{k < b-f} (1-p)^k` in
/// expectation. An agent stops at its first exhausted task.
pub fn closed_form(
    spec: &ProblemSpec,
    actions: &[Action],
    budgets: &BTreeMap<String, u32>,
    consumed: &BTreeMap<(AgentIx, TaskIx), u32>,
) -> (f64, f64) {
    let mut lanes: BTreeMap<AgentIx, Vec<Action>> = BTreeMap::new();
    for a in actions {
        lanes.entry(a.agent()).or_default().push(*a);
    }
    let mut p_total = 1.0;
    let mut cost_total = 0.0;
    for (agent, lane) in lanes {
        let mut reach = 1.0;
        let mut cost = 0.0;
        for a in lane {
            match a {
                Action::Move { from, to, .. } => cost += reach * spec.distance(from, to).unwrap(),
                Action::Do { task, .. } => {
                    let p = spec.p_success(agent, task);
                    let c = spec.task_cost(agent, task);
                    let f = consumed.get(&(agent, task)).copied().unwrap_or(0);
                    let b = budgets.get(&spec.task(task).id).copied().unwrap_or(f + 1);
                    let n = b - f;
                    let q = 1.0 - p;
                    let attempts: f64 = (0..n).map(|k| q.powi(k as i32)).sum();
                    cost += reach * c * attempts;
                    reach *= 1.0 - q.powi(n as i32);
                }
            }
        }
        p_total *= reach;
        cost_total += cost;
    }
    (p_total, cost_total)
}

pub fn closed_form_plan(spec: &ProblemSpec, plan: &Plan, budgets: &BTreeMap<String, u32>) -> (f64, f64) {
    closed_form(spec, &plan.total_order, budgets, &BTreeMap::new())
}

pub fn budgets(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Every budget dictionary over `slots` (task id, lo, hi), in lexicographic
/// order of the slot list.
pub fn all_budgets(slots: &[(String, u32, u32)]) -> Vec<BTreeMap<String, u32>> {
    let mut out = vec![BTreeMap::new()];
    for (id, lo, hi) in slots {
        out = out
            .into_iter()
            .flat_map(|m| {
                (*lo..=*hi).map(move |v| {
                    let mut m = m.clone();
                    m.insert(id.clone(), v);
                    m
                })
            })
            .collect();
    }
    out
}

/// Feasible (cost, probability) points not dominated by any other feasible
/// point, sorted by cost. Duplicates collapse.
pub fn brute_force_front(points: &[(f64, f64)], p_succ: f64) -> Vec<(f64, f64)> {
    let feasible: Vec<(f64, f64)> = points.iter().copied().filter(|(_, p)| *p >= p_succ).collect();
    let mut front: Vec<(f64, f64)> = feasible
        .iter()
        .copied()
        .filter(|&(c, p)| !feasible.iter().any(|&(c2, p2)| c2 <= c && p2 >= p && (c2 < c || p2 > p)))
        .collect();
    front.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    front.dedup();
    front
}

fn close(x: (f64, f64), y: (f64, f64), tol: f64) -> bool {
    (x.0 - y.0).abs() <= tol && (x.1 - y.1).abs() <= tol
}

fn dedup_tol(v: &[(f64, f64)], tol: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &x in v {
        if !out.last().is_some_and(|&y| close(x, y, tol)) {
            out.push(x);
        }
    }
    out
}

/// Same sorted front up to `tol`, with points closer than `tol` merged.
pub fn fronts_match(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> bool {
    let (a, b) = (dedup_tol(a, tol), dedup_tol(b, tol));
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| close(*x, *y, tol))
}

/// Fronts agree up to `tol`: each point of one is matched or dominated,
/// within `tol` on both axes, by some point of the other. Exact list
/// equality is too brittle once probabilities crowd against 1.
pub fn fronts_equivalent(a: &[(f64, f64)], b: &[(f64, f64)], tol: f64) -> bool {
    let covered = |x: &(f64, f64), by: &[(f64, f64)]| by.iter().any(|y| y.0 <= x.0 + tol && y.1 >= x.1 - tol);
    !a.is_empty() == !b.is_empty() && a.iter().all(|x| covered(x, b)) && b.iter().all(|x| covered(x, a))
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Cheapest travel cost to any goal state by uniform-cost search over the
/// full state graph, or `None` when no goal is reachable or more than
/// `limit` states are met.
pub fn optimal_travel_cost(spec: &ProblemSpec, limit: usize) -> Option<f64> {
    let init = WorldState::initial(spec).ok()?;
    let mut ids: HashMap<_, usize> = HashMap::new();
    let mut states = vec![init.clone()];
    ids.insert(init.key(), 0);
    let mut dist = vec![0.0];
    let mut heap = BinaryHeap::new();
    heap.push(Entry(0.0, 0));
    while let Some(Entry(d, i)) = heap.pop() {
        if d > dist[i] {
            continue;
        }
        let s = states[i].clone();
        if is_goal(spec, &s) {
            return Some(d);
        }
        for a in enabled_actions(spec, &s) {
            let n = apply(spec, &s, &a).ok()?;
            let nd = n.travel_cost;
            let j = match ids.get(&n.key()) {
                Some(&j) => j,
                None => {
                    if states.len() >= limit {
                        return None;
                    }
                    states.push(n.clone());
                    dist.push(f64::INFINITY);
                    ids.insert(n.key(), states.len() - 1);
                    states.len() - 1
                }
            };
            if nd < dist[j] {
                dist[j] = nd;
                heap.push(Entry(nd, j));
            }
        }
    }
    None
}

/// All-pairs shortest distances (Floyd-Warshall) over the path graph.
pub fn all_pairs(spec: &ProblemSpec) -> Vec<Vec<f64>> {
    let n = spec.locations().len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for p in spec.paths() {
        let (a, b) = (p.start.ix(), p.end.ix());
        d[a][b] = d[a][b].min(p.distance);
        d[b][a] = d[b][a].min(p.distance);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Small random mission on a `rows x cols` unit grid, built as JSON so the
/// generator shares nothing with the crate's own instance builders.
pub fn grid_spec(rows: usize, cols: usize, task_cells: &[(usize, u8)], agents: &[bool], p: f64) -> ProblemSpec {
    let id = |r: usize, c: usize| format!("l{}", r * cols + c + 1);
    let mut paths = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                paths.push(serde_json::json!({"start": id(r, c), "end": id(r, c + 1), "distance": 1}));
            }
            if r + 1 < rows {
                paths.push(serde_json::json!({"start": id(r, c), "end": id(r + 1, c), "distance": 1}));
            }
        }
    }
    let mut groups: BTreeMap<String, Vec<serde_json::Value>> = BTreeMap::new();
    for (i, (cell, g)) in task_cells.iter().enumerate() {
        let cell = cell % (rows * cols);
        groups.entry(format!("g{g}")).or_default().push(serde_json::json!({"id": format!("x{i}"), "location": format!("l{}", cell + 1)}));
    }
    let group_ids: Vec<String> = groups.keys().cloned().collect();
    let agents: Vec<serde_json::Value> = agents
        .iter()
        .enumerate()
        .map(|(i, worker)| {
            serde_json::json!({
                "id": format!("a{i}"),
                "type": if *worker { "worker" } else { "robot" },
                "start": "l1",
                "tasks": group_ids.iter().map(|g| serde_json::json!({"id": g, "cost": 1 + i, "p_success": p, "retries": 3})).collect::<Vec<_>>(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "locations": (0..rows * cols).map(|i| serde_json::json!({"id": format!("l{}", i + 1)})).collect::<Vec<_>>(),
        "paths": paths,
        "tasks": groups.into_iter().map(|(g, inst)| serde_json::json!({"id": g, "instances": inst})).collect::<Vec<_>>(),
        "agents": agents,
        "constraints": {"mission_probability_of_success": 0.5, "min_assignment_probability": 0.5},
    });
    let doc: SpecDocument = serde_json::from_value(doc).expect("generator emits valid documents");
    ProblemSpec::from_document(&doc).expect("generator emits valid missions")
}
