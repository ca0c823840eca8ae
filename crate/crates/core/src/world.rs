//! Grounded planning semantics: states, enabled actions, transitions and the
//! goal test.
//!
//! Locations and tasks are packed into `u128` bitmasks, which caps missions
//! at 128 locations and 128 task instances.

use std::fmt;

use crate::spec::{AgentIx, LocIx, ProblemSpec, TaskIx};

pub const MAX_ITEMS: usize = 128;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("action {0} is not enabled in this state")]
    NotEnabled(String),
    #[error("mission too large: {what} = {count} (at most {MAX_ITEMS} supported)")]
    TooLarge { what: &'static str, count: usize },
    #[error("cannot parse action '{0}'")]
    BadAction(String),
    #[error("unknown {kind} '{id}'")]
    UnknownId { kind: &'static str, id: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Move { agent: AgentIx, from: LocIx, to: LocIx },
    Do { agent: AgentIx, task: TaskIx, loc: LocIx },
}

impl Action {
    pub fn agent(&self) -> AgentIx {
        match *self {
            Action::Move { agent, .. } | Action::Do { agent, .. } => agent,
        }
    }

    pub fn is_move(&self) -> bool {
        matches!(self, Action::Move { .. })
    }

    pub fn task(&self) -> Option<TaskIx> {
        match *self {
            Action::Do { task, .. } => Some(task),
            Action::Move { .. } => None,
        }
    }

    /// Human-readable form, e.g. `Move(w2, l1, l4)`.
    pub fn display<'a>(&'a self, spec: &'a ProblemSpec) -> ActionDisplay<'a> {
        ActionDisplay { action: self, spec }
    }

    /// Parses the notation produced by [`Action::display`].
    pub fn parse(spec: &ProblemSpec, text: &str) -> Result<Action, WorldError> {
        let bad = || WorldError::BadAction(text.to_string());
        let text = text.trim();
        let open = text.find('(').ok_or_else(bad)?;
        if !text.ends_with(')') {
            return Err(bad());
        }
        let name = text[..open].trim();
        let args: Vec<&str> = text[open + 1..text.len() - 1].split(',').map(str::trim).collect();
        if args.len() != 3 {
            return Err(bad());
        }
        let agent = spec
            .agent_by_id(args[0])
            .ok_or_else(|| WorldError::UnknownId { kind: "agent", id: args[0].into() })?;
        let loc = |s: &str| spec.location_by_id(s).ok_or_else(|| WorldError::UnknownId { kind: "location", id: s.into() });
        match name.to_ascii_lowercase().as_str() {
            "move" => Ok(Action::Move { agent, from: loc(args[1])?, to: loc(args[2])? }),
            "do" => {
                let task = spec
                    .task_by_id(args[1])
                    .ok_or_else(|| WorldError::UnknownId { kind: "task", id: args[1].into() })?;
                Ok(Action::Do { agent, task, loc: loc(args[2])? })
            }
            _ => Err(bad()),
        }
    }
}

pub struct ActionDisplay<'a> {
    action: &'a Action,
    spec: &'a ProblemSpec,
}

impl fmt::Display for ActionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.spec;
        match *self.action {
            Action::Move { agent, from, to } => {
                write!(f, "Move({}, {}, {})", s.agent(agent).id, s.location(from).id, s.location(to).id)
            }
            Action::Do { agent, task, loc } => {
                write!(f, "Do({}, {}, {})", s.agent(agent).id, s.task(task).id, s.location(loc).id)
            }
        }
    }
}

/// Parses one action per non-empty line.
pub fn parse_actions(spec: &ProblemSpec, text: &str) -> Result<Vec<Action>, WorldError> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| Action::parse(spec, l)).collect()
}

/// Search-relevant part of a state (travel cost excluded).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey {
    pub agent_loc: Vec<LocIx>,
    pub empty: u128,
    pub done: u128,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub agent_loc: Vec<LocIx>,
    /// Bit `l` set when location `l` is flagged empty.
    pub empty: u128,
    /// Bit `t` set when task `t` is done.
    pub done: u128,
    pub travel_cost: f64,
}

#[inline]
fn bit(i: usize) -> u128 {
    1u128 << i
}

pub fn check_size(spec: &ProblemSpec) -> Result<(), WorldError> {
    if spec.locations().len() > MAX_ITEMS {
        return Err(WorldError::TooLarge { what: "locations", count: spec.locations().len() });
    }
    if spec.tasks().len() > MAX_ITEMS {
        return Err(WorldError::TooLarge { what: "tasks", count: spec.tasks().len() });
    }
    Ok(())
}

impl WorldState {
    /// Initial state: every location not hosting an agent is empty, tasks not
    /// pending are done.
    pub fn initial(spec: &ProblemSpec) -> Result<Self, WorldError> {
        check_size(spec)?;
        let init = spec.initial();
        let mut empty = 0u128;
        for l in spec.location_indices() {
            if !init.agent_loc.contains(&l) {
                empty |= bit(l.ix());
            }
        }
        let mut done = 0u128;
        for t in spec.task_indices() {
            if !init.pending.contains(&t) {
                done |= bit(t.ix());
            }
        }
        Ok(WorldState { agent_loc: init.agent_loc.clone(), empty, done, travel_cost: 0.0 })
    }

    pub fn key(&self) -> StateKey {
        StateKey { agent_loc: self.agent_loc.clone(), empty: self.empty, done: self.done }
    }

    pub fn is_empty(&self, l: LocIx) -> bool {
        self.empty & bit(l.ix()) != 0
    }

    pub fn is_done(&self, t: TaskIx) -> bool {
        self.done & bit(t.ix()) != 0
    }

    pub fn done_tasks(&self) -> impl Iterator<Item = TaskIx> + '_ {
        (0..MAX_ITEMS as u16).map(TaskIx).filter(|t| self.is_done(*t))
    }

    pub fn agent_at(&self, a: AgentIx) -> LocIx {
        self.agent_loc[a.ix()]
    }

    /// Whether `action` satisfies its preconditions here.
    pub fn is_enabled(&self, spec: &ProblemSpec, action: &Action) -> bool {
        match *action {
            Action::Move { agent, from, to } => {
                spec.has_path(from, to) && self.agent_at(agent) == from && self.is_empty(to)
            }
            Action::Do { agent, task, loc } => {
                self.agent_at(agent) == loc
                    && spec.task(task).location == loc
                    && !self.is_done(task)
                    && spec.can_allocate(agent, task)
            }
        }
    }

    /// Applies an action without checking preconditions.
    pub fn apply_unchecked(&mut self, spec: &ProblemSpec, action: &Action) {
        match *action {
            Action::Move { agent, from, to } => {
                self.agent_loc[agent.ix()] = to;
                self.empty |= bit(from.ix());
                self.empty &= !bit(to.ix());
                self.travel_cost += spec.distance(from, to).unwrap_or(0.0);
            }
            Action::Do { task, .. } => {
                self.done |= bit(task.ix());
            }
        }
    }
}

/// Every enabled action, in canonical order (agent, then Moves by target,
/// then Dos by task).
pub fn enabled_actions(spec: &ProblemSpec, state: &WorldState) -> Vec<Action> {
    let mut out = Vec::new();
    for agent in spec.agent_indices() {
        push_agent_actions(spec, state, agent, &mut out);
    }
    out
}

pub(crate) fn push_agent_actions(spec: &ProblemSpec, state: &WorldState, agent: AgentIx, out: &mut Vec<Action>) {
    let from = state.agent_at(agent);
    for &(to, _) in spec.neighbours(from) {
        if state.is_empty(to) {
            out.push(Action::Move { agent, from, to });
        }
    }
    push_agent_dos(spec, state, agent, out);
}

pub(crate) fn push_agent_dos(spec: &ProblemSpec, state: &WorldState, agent: AgentIx, out: &mut Vec<Action>) {
    let here = state.agent_at(agent);
    for task in spec.task_indices() {
        if spec.task(task).location == here && !state.is_done(task) && spec.can_allocate(agent, task) {
            out.push(Action::Do { agent, task, loc: here });
        }
    }
}

/// Applies an enabled action.
pub fn apply(spec: &ProblemSpec, state: &WorldState, action: &Action) -> Result<WorldState, WorldError> {
    if !state.is_enabled(spec, action) {
        return Err(WorldError::NotEnabled(action.display(spec).to_string()));
    }
    let mut next = state.clone();
    next.apply_unchecked(spec, action);
    Ok(next)
}

/// All task instances done.
pub fn is_goal(spec: &ProblemSpec, state: &WorldState) -> bool {
    let all = if spec.tasks().len() == MAX_ITEMS { u128::MAX } else { bit(spec.tasks().len()) - 1 };
    state.done & all == all
}

/// Locations where several agents start. The empty-flag semantics lets a
/// depot report "empty" while agents are still parked there, so occupancy
/// checks skip these.
pub fn depots(spec: &ProblemSpec) -> Vec<LocIx> {
    let locs = &spec.initial().agent_loc;
    let mut out: Vec<LocIx> =
        locs.iter().copied().filter(|l| locs.iter().filter(|m| *m == l).count() > 1).collect();
    out.sort();
    out.dedup();
    out
}
