//! Forward state-space search minimising accumulated travel cost.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Plan, PlanError};
use crate::spec::{AgentIx, ProblemSpec, TaskIx};
use crate::world::{is_goal, push_agent_actions, push_agent_dos, Action, StateKey, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// A*: optimal with an admissible heuristic.
    Astar,
    /// Greedy best-first on the heuristic alone.
    Gbfs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Heuristic {
    /// Largest distance any undone task still needs: some capable agent has
    /// to travel at least that far. Admissible.
    Max,
    /// Sum over undone tasks of the closest capable agent distance, divided
    /// by the number of agents. Not admissible (one agent serving tasks
    /// strung along a line overestimates), but well informed.
    TaskSum,
    /// Zero everywhere (uniform-cost search).
    Blind,
}

#[derive(Clone, Debug)]
pub struct PlannerConfig {
    pub strategy: Strategy,
    pub heuristic: Heuristic,
    pub timeout: Duration,
    pub max_nodes: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { strategy: Strategy::Astar, heuristic: Heuristic::Max, timeout: Duration::from_secs(60), max_nodes: None }
    }
}

impl PlannerConfig {
    pub fn gbfs() -> Self {
        PlannerConfig { strategy: Strategy::Gbfs, heuristic: Heuristic::TaskSum, ..Default::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SearchStats {
    pub expanded: usize,
    pub generated: usize,
    pub elapsed: Duration,
}

struct HeuristicTable {
    /// For each task, the agents allowed to do it.
    capable: Vec<Vec<AgentIx>>,
    kind: Heuristic,
    agents: f64,
}

impl HeuristicTable {
    fn new(spec: &ProblemSpec, kind: Heuristic) -> Self {
        let capable = spec
            .task_indices()
            .map(|t| spec.agent_indices().filter(|a| spec.can_allocate(*a, t)).collect())
            .collect();
        HeuristicTable { capable, kind, agents: spec.agents().len().max(1) as f64 }
    }

    fn eval(&self, spec: &ProblemSpec, s: &WorldState) -> f64 {
        if self.kind == Heuristic::Blind {
            // still detect dead ends
            for t in spec.task_indices() {
                if !s.is_done(t) && self.task_distance(spec, s, t).is_infinite() {
                    return f64::INFINITY;
                }
            }
            return 0.0;
        }
        let mut max = 0.0f64;
        let mut sum = 0.0;
        for t in spec.task_indices() {
            if s.is_done(t) {
                continue;
            }
            let d = self.task_distance(spec, s, t);
            if d.is_infinite() {
                return f64::INFINITY;
            }
            max = max.max(d);
            sum += d;
        }
        match self.kind {
            Heuristic::Max => max,
            Heuristic::TaskSum => sum / self.agents,
            Heuristic::Blind => unreachable!(),
        }
    }

    fn task_distance(&self, spec: &ProblemSpec, s: &WorldState, t: TaskIx) -> f64 {
        let loc = spec.task(t).location;
        self.capable[t.ix()]
            .iter()
            .map(|a| spec.shortest_distance(s.agent_at(*a), loc))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Heuristic estimate of the remaining travel cost from `state`.
pub fn heuristic_value(spec: &ProblemSpec, state: &WorldState, kind: Heuristic) -> f64 {
    HeuristicTable::new(spec, kind).eval(spec, state)
}

struct Node {
    key: StateKey,
    g: f64,
    parent: u32,
    action: Option<Action>,
    depth: u32,
}

#[derive(PartialEq)]
struct OpenEntry {
    f: f64,
    h: f64,
    depth: u32,
    seq: u64,
    node: u32,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap; reverse so the smallest key pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.depth.cmp(&self.depth))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn state_of(key: &StateKey, g: f64) -> WorldState {
    WorldState { agent_loc: key.agent_loc.clone(), empty: key.empty, done: key.done, travel_cost: g }
}

/// Successors in canonical order. An enabled Do costs nothing and disables
/// nothing other agents need, so when one exists it is the only successor.
fn successors(spec: &ProblemSpec, s: &WorldState, buf: &mut Vec<Action>) {
    buf.clear();
    for agent in spec.agent_indices() {
        push_agent_dos(spec, s, agent, buf);
        if !buf.is_empty() {
            buf.truncate(1);
            return;
        }
    }
    for agent in spec.agent_indices() {
        push_agent_actions(spec, s, agent, buf);
    }
}

/// Plans the mission from its initial configuration.
pub fn plan_mission(spec: &ProblemSpec, cfg: &PlannerConfig) -> Result<(Plan, SearchStats), PlanError> {
    let start = Instant::now();
    let init = WorldState::initial(spec)?;
    let table = HeuristicTable::new(spec, cfg.heuristic);
    let mut stats = SearchStats::default();

    let h0 = table.eval(spec, &init);
    if h0.is_infinite() {
        return Err(PlanError::NoPlanExists);
    }
    let mut nodes = vec![Node { key: init.key(), g: 0.0, parent: u32::MAX, action: None, depth: 0 }];
    let mut best: HashMap<StateKey, f64> = HashMap::new();
    best.insert(init.key(), 0.0);
    let mut open = BinaryHeap::new();
    let reopen = cfg.strategy == Strategy::Astar;
    let priority = |g: f64, h: f64| if reopen { g + h } else { h };
    open.push(OpenEntry { f: priority(0.0, h0), h: h0, depth: 0, seq: 0, node: 0 });
    let mut seq = 1u64;
    let mut buf = Vec::new();

    while let Some(entry) = open.pop() {
        let idx = entry.node as usize;
        let g = nodes[idx].g;
        if reopen && best.get(&nodes[idx].key).is_some_and(|b| *b < g) {
            continue;
        }
        let state = state_of(&nodes[idx].key, g);
        if is_goal(spec, &state) {
            stats.elapsed = start.elapsed();
            let mut trace = Vec::with_capacity(nodes[idx].depth as usize);
            let mut cur = idx;
            while let Some(a) = nodes[cur].action {
                trace.push(a);
                cur = nodes[cur].parent as usize;
            }
            trace.reverse();
            return Ok((Plan::from_trace(spec, trace), stats));
        }
        stats.expanded += 1;
        if stats.expanded % 256 == 0 && start.elapsed() > cfg.timeout {
            return Err(PlanError::Timeout { expanded: stats.expanded });
        }
        successors(spec, &state, &mut buf);
        for action in &buf {
            let mut next = state.clone();
            next.apply_unchecked(spec, action);
            let key = next.key();
            let g2 = next.travel_cost;
            match best.entry(key) {
                Entry::Occupied(mut e) => {
                    if !reopen || *e.get() <= g2 {
                        continue;
                    }
                    e.insert(g2);
                }
                Entry::Vacant(e) => {
                    e.insert(g2);
                }
            }
            let h = table.eval(spec, &next);
            if h.is_infinite() {
                continue;
            }
            stats.generated += 1;
            if let Some(limit) = cfg.max_nodes {
                if nodes.len() >= limit {
                    return Err(PlanError::NodeLimit { limit });
                }
            }
            let depth = nodes[idx].depth + 1;
            nodes.push(Node { key: next.key(), g: g2, parent: idx as u32, action: Some(*action), depth });
            open.push(OpenEntry { f: priority(g2, h), h, depth, seq, node: (nodes.len() - 1) as u32 });
            seq += 1;
        }
    }
    Err(PlanError::NoPlanExists)
}
