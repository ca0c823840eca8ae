//! Mission specification: the JSON document, its validation, and the
//! resolved [`ProblemSpec`] that every later stage reads.
//!
//! All collections are stored sorted by id, and cross references are
//! resolved to dense indices ([`AgentIx`], [`LocIx`], [`TaskIx`], [`GroupIx`])
//! so the planner and model builders can work on plain vectors.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! index_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u16);

        impl $name {
            #[inline]
            pub fn ix(self) -> usize {
                self.0 as usize
            }
        }
    };
}

index_type!(
    /// Position of an agent in [`ProblemSpec::agents`].
    AgentIx
);
index_type!(
    /// Position of a location in [`ProblemSpec::locations`].
    LocIx
);
index_type!(
    /// Position of a task instance in [`ProblemSpec::tasks`].
    TaskIx
);
index_type!(
    /// Position of a task group in [`ProblemSpec::groups`].
    GroupIx
);

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

/// Raw mission file as written by engineers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub locations: Vec<LocationDoc>,
    pub paths: Vec<PathDoc>,
    pub tasks: Vec<TaskGroupDoc>,
    pub agents: Vec<AgentDoc>,
    pub constraints: ConstraintsDoc,
    /// Task instances already completed in the initial configuration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub completed_tasks: Vec<String>,
    /// Per-instance success probabilities observed at runtime.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<OverrideDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathDoc {
    pub start: String,
    pub end: String,
    pub distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskGroupDoc {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub instances: Vec<TaskInstanceDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskInstanceDoc {
    pub id: String,
    pub location: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: AgentKind,
    /// Defaults to the first location of the document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<String>,
    pub tasks: Vec<CapabilityDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapabilityDoc {
    pub id: String,
    pub cost: f64,
    pub p_success: f64,
    pub retries: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsDoc {
    pub mission_probability_of_success: f64,
    pub min_assignment_probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverrideDoc {
    pub agent: String,
    pub task: String,
    pub p_success: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Worker,
    Robot,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Worker => "worker",
            AgentKind::Robot => "robot",
        })
    }
}

// ---------------------------------------------------------------------------
// Violations
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One problem found in a specification. `path` points into the JSON
/// document, e.g. `agents[2].tasks[0].p_success`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl Violation {
    fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { severity: Severity::Error, path: path.into(), message: message.into() }
    }

    fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { severity: Severity::Warning, path: path.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} at {}: {}", self.path, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("malformed specification JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid specification: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn unit_interval(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

fn open_unit_interval(x: f64) -> bool {
    x.is_finite() && x > 0.0 && x <= 1.0
}

/// Checks every structural invariant of a document. An empty result means
/// the document resolves to a [`ProblemSpec`] with no warnings.
pub fn validate_document(doc: &SpecDocument) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut loc_ids = BTreeSet::new();
    for (i, l) in doc.locations.iter().enumerate() {
        if !loc_ids.insert(l.id.as_str()) {
            out.push(Violation::error(format!("locations[{i}].id"), format!("duplicate location id '{}'", l.id)));
        }
    }
    if doc.locations.is_empty() {
        out.push(Violation::error("locations", "at least one location is required"));
    }

    let mut seen_pairs = BTreeSet::new();
    for (i, p) in doc.paths.iter().enumerate() {
        for (field, id) in [("start", &p.start), ("end", &p.end)] {
            if !loc_ids.contains(id.as_str()) {
                out.push(Violation::error(format!("paths[{i}].{field}"), format!("unknown location '{id}'")));
            }
        }
        if p.start == p.end {
            out.push(Violation::error(format!("paths[{i}]"), "path start and end must differ"));
        }
        if !(p.distance.is_finite() && p.distance > 0.0) {
            out.push(Violation::error(format!("paths[{i}].distance"), format!("distance must be positive, got {}", p.distance)));
        }
        let key = if p.start <= p.end { (p.start.as_str(), p.end.as_str()) } else { (p.end.as_str(), p.start.as_str()) };
        if !seen_pairs.insert(key) {
            out.push(Violation::error(format!("paths[{i}]"), format!("duplicate path between '{}' and '{}'", key.0, key.1)));
        }
    }

    let mut group_ids = BTreeSet::new();
    let mut task_ids = BTreeMap::new();
    for (g, group) in doc.tasks.iter().enumerate() {
        if !group_ids.insert(group.id.as_str()) {
            out.push(Violation::error(format!("tasks[{g}].id"), format!("duplicate task group id '{}'", group.id)));
        }
        if group.instances.is_empty() {
            out.push(Violation::error(format!("tasks[{g}].instances"), "task group has no instances"));
        }
        for (i, inst) in group.instances.iter().enumerate() {
            if task_ids.insert(inst.id.as_str(), group.id.as_str()).is_some() {
                out.push(Violation::error(format!("tasks[{g}].instances[{i}].id"), format!("duplicate task id '{}'", inst.id)));
            }
            if !loc_ids.contains(inst.location.as_str()) {
                out.push(Violation::error(
                    format!("tasks[{g}].instances[{i}].location"),
                    format!("unknown location '{}'", inst.location),
                ));
            }
        }
    }

    let mut agent_ids = BTreeSet::new();
    for (a, agent) in doc.agents.iter().enumerate() {
        if !agent_ids.insert(agent.id.as_str()) {
            out.push(Violation::error(format!("agents[{a}].id"), format!("duplicate agent id '{}'", agent.id)));
        }
        if let Some(start) = &agent.start {
            if !loc_ids.contains(start.as_str()) {
                out.push(Violation::error(format!("agents[{a}].start"), format!("unknown location '{start}'")));
            }
        }
        let mut cap_groups = BTreeSet::new();
        for (c, cap) in agent.tasks.iter().enumerate() {
            let at = format!("agents[{a}].tasks[{c}]");
            if !group_ids.contains(cap.id.as_str()) {
                out.push(Violation::error(format!("{at}.id"), format!("unknown task group '{}'", cap.id)));
            }
            if !cap_groups.insert(cap.id.as_str()) {
                out.push(Violation::error(format!("{at}.id"), format!("duplicate capability for group '{}'", cap.id)));
            }
            if !unit_interval(cap.p_success) {
                out.push(Violation::error(format!("{at}.p_success"), format!("probability must lie in [0,1], got {}", cap.p_success)));
            }
            if !(cap.cost.is_finite() && cap.cost >= 0.0) {
                out.push(Violation::error(format!("{at}.cost"), format!("cost must be non-negative, got {}", cap.cost)));
            }
            if cap.retries < 0 || cap.retries > u32::MAX as i64 {
                out.push(Violation::error(format!("{at}.retries"), format!("retries must be a non-negative integer, got {}", cap.retries)));
            }
        }
    }

    let c = &doc.constraints;
    if !open_unit_interval(c.mission_probability_of_success) {
        out.push(Violation::error(
            "constraints.mission_probability_of_success",
            format!("must lie in (0,1], got {}", c.mission_probability_of_success),
        ));
    }
    if !open_unit_interval(c.min_assignment_probability) {
        out.push(Violation::error(
            "constraints.min_assignment_probability",
            format!("must lie in (0,1], got {}", c.min_assignment_probability),
        ));
    }

    let mut completed = BTreeSet::new();
    for (i, t) in doc.completed_tasks.iter().enumerate() {
        if !task_ids.contains_key(t.as_str()) {
            out.push(Violation::error(format!("completed_tasks[{i}]"), format!("unknown task '{t}'")));
        }
        if !completed.insert(t.as_str()) {
            out.push(Violation::error(format!("completed_tasks[{i}]"), format!("task '{t}' listed twice")));
        }
    }
    let mut override_keys = BTreeSet::new();
    for (i, o) in doc.overrides.iter().enumerate() {
        if !agent_ids.contains(o.agent.as_str()) {
            out.push(Violation::error(format!("overrides[{i}].agent"), format!("unknown agent '{}'", o.agent)));
        }
        if !task_ids.contains_key(o.task.as_str()) {
            out.push(Violation::error(format!("overrides[{i}].task"), format!("unknown task '{}'", o.task)));
        }
        if !unit_interval(o.p_success) {
            out.push(Violation::error(format!("overrides[{i}].p_success"), format!("probability must lie in [0,1], got {}", o.p_success)));
        }
        if !override_keys.insert((o.agent.as_str(), o.task.as_str())) {
            out.push(Violation::error(format!("overrides[{i}]"), "duplicate override"));
        }
    }

    // Allocation warnings only make sense once the references resolve.
    if out.iter().all(|v| v.severity != Severity::Error) {
        let gamma = c.min_assignment_probability;
        for (g, group) in doc.tasks.iter().enumerate() {
            for (i, inst) in group.instances.iter().enumerate() {
                if completed.contains(inst.id.as_str()) {
                    continue;
                }
                let capable = doc.agents.iter().any(|agent| {
                    let base = agent.tasks.iter().find(|cap| cap.id == group.id).map_or(0.0, |cap| cap.p_success);
                    let p = doc
                        .overrides
                        .iter()
                        .find(|o| o.agent == agent.id && o.task == inst.id)
                        .map_or(base, |o| o.p_success);
                    p >= gamma
                });
                if !capable {
                    out.push(Violation::warning(
                        format!("tasks[{g}].instances[{i}]"),
                        format!("no agent can be allocated task '{}' (p_success >= {gamma})", inst.id),
                    ));
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Resolved specification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct Location {
    pub id: String,
    pub description: Option<String>,
}

/// A declared path. The symmetric closure is available through
/// [`ProblemSpec::distance`].
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub start: LocIx,
    pub end: LocIx,
    pub distance: f64,
    pub description: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskInstance {
    pub id: String,
    pub group: GroupIx,
    pub location: LocIx,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TaskGroup {
    pub id: String,
    pub description: Option<String>,
    /// Instance indices, sorted by id.
    pub members: Vec<TaskIx>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capability {
    pub group: GroupIx,
    pub cost: f64,
    pub p_success: f64,
    pub max_retries: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub id: String,
    pub kind: AgentKind,
    pub start: LocIx,
    /// Sorted by group.
    pub capabilities: Vec<Capability>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MissionConstraints {
    /// Mission success floor.
    pub p_succ: f64,
    /// Minimum success probability for allocating a task to an agent.
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    MinimizeCost,
    MaximizeSuccess,
}

/// Initial configuration: agent locations and pending tasks.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialConfig {
    pub agent_loc: Vec<LocIx>,
    pub pending: BTreeSet<TaskIx>,
}

/// Resolved, immutable mission specification.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    locations: Vec<Location>,
    paths: Vec<Path>,
    groups: Vec<TaskGroup>,
    tasks: Vec<TaskInstance>,
    agents: Vec<Agent>,
    constraints: MissionConstraints,
    initial: InitialConfig,
    overrides: BTreeMap<(AgentIx, TaskIx), f64>,
    // derived tables
    loc_index: HashMap<String, LocIx>,
    task_index: HashMap<String, TaskIx>,
    agent_index: HashMap<String, AgentIx>,
    group_index: HashMap<String, GroupIx>,
    adjacency: Vec<Vec<(LocIx, f64)>>,
    shortest: Vec<f64>,
}

impl PartialEq for ProblemSpec {
    fn eq(&self, other: &Self) -> bool {
        // derived tables are functions of these fields
        self.locations == other.locations
            && self.paths == other.paths
            && self.groups == other.groups
            && self.tasks == other.tasks
            && self.agents == other.agents
            && self.constraints == other.constraints
            && self.initial == other.initial
            && self.overrides == other.overrides
    }
}

/// Parses and validates a JSON mission document.
pub fn parse_problem_spec(text: &str) -> Result<ProblemSpec, SpecError> {
    let doc: SpecDocument = serde_json::from_str(text)?;
    ProblemSpec::from_document(&doc)
}

impl ProblemSpec {
    /// Resolves a document. Fails if [`validate_document`] reports any error;
    /// warnings are accepted and can be retrieved again with
    /// [`ProblemSpec::validate`].
    pub fn from_document(doc: &SpecDocument) -> Result<Self, SpecError> {
        let errors: Vec<_> =
            validate_document(doc).into_iter().filter(|v| v.severity == Severity::Error).collect();
        if !errors.is_empty() {
            return Err(SpecError::Invalid(errors));
        }
        if doc.locations.len() > u16::MAX as usize
            || doc.agents.len() > u16::MAX as usize
            || doc.tasks.iter().map(|g| g.instances.len()).sum::<usize>() > u16::MAX as usize
        {
            return Err(SpecError::Invalid(vec![Violation::error("", "specification too large")]));
        }

        let mut locations: Vec<Location> =
            doc.locations.iter().map(|l| Location { id: l.id.clone(), description: l.description.clone() }).collect();
        locations.sort_by(|a, b| a.id.cmp(&b.id));
        let loc_index: HashMap<String, LocIx> =
            locations.iter().enumerate().map(|(i, l)| (l.id.clone(), LocIx(i as u16))).collect();

        let mut group_docs: Vec<&TaskGroupDoc> = doc.tasks.iter().collect();
        group_docs.sort_by(|a, b| a.id.cmp(&b.id));
        let group_index: HashMap<String, GroupIx> =
            group_docs.iter().enumerate().map(|(i, g)| (g.id.clone(), GroupIx(i as u16))).collect();

        let mut tasks: Vec<TaskInstance> = group_docs
            .iter()
            .flat_map(|g| {
                let gi = group_index[&g.id];
                let loc_index = &loc_index;
                g.instances.iter().map(move |inst| TaskInstance {
                    id: inst.id.clone(),
                    group: gi,
                    location: loc_index[&inst.location],
                })
            })
            .collect();
        tasks.sort_by(|a, b| a.id.cmp(&b.id));
        let task_index: HashMap<String, TaskIx> =
            tasks.iter().enumerate().map(|(i, t)| (t.id.clone(), TaskIx(i as u16))).collect();

        let groups: Vec<TaskGroup> = group_docs
            .iter()
            .map(|g| {
                let mut members: Vec<TaskIx> = g.instances.iter().map(|i| task_index[&i.id]).collect();
                members.sort();
                TaskGroup { id: g.id.clone(), description: g.description.clone(), members }
            })
            .collect();

        let default_start = loc_index[&doc.locations[0].id];
        let mut agents: Vec<Agent> = doc
            .agents
            .iter()
            .map(|a| {
                let mut capabilities: Vec<Capability> = a
                    .tasks
                    .iter()
                    .map(|c| Capability {
                        group: group_index[&c.id],
                        cost: c.cost,
                        p_success: c.p_success,
                        max_retries: c.retries as u32,
                    })
                    .collect();
                capabilities.sort_by_key(|c| c.group);
                Agent {
                    id: a.id.clone(),
                    kind: a.kind,
                    start: a.start.as_ref().map_or(default_start, |s| loc_index[s]),
                    capabilities,
                }
            })
            .collect();
        agents.sort_by(|a, b| a.id.cmp(&b.id));
        let agent_index: HashMap<String, AgentIx> =
            agents.iter().enumerate().map(|(i, a)| (a.id.clone(), AgentIx(i as u16))).collect();

        let mut paths: Vec<Path> = doc
            .paths
            .iter()
            .map(|p| Path {
                start: loc_index[&p.start],
                end: loc_index[&p.end],
                distance: p.distance,
                description: p.description.clone(),
            })
            .collect();
        paths.sort_by_key(|p| (p.start, p.end));

        let completed: BTreeSet<TaskIx> = doc.completed_tasks.iter().map(|t| task_index[t]).collect();
        let initial = InitialConfig {
            agent_loc: agents.iter().map(|a| a.start).collect(),
            pending: (0..tasks.len() as u16).map(TaskIx).filter(|t| !completed.contains(t)).collect(),
        };
        let overrides = doc
            .overrides
            .iter()
            .map(|o| ((agent_index[&o.agent], task_index[&o.task]), o.p_success))
            .collect();

        let mut spec = ProblemSpec {
            locations,
            paths,
            groups,
            tasks,
            agents,
            constraints: MissionConstraints {
                p_succ: doc.constraints.mission_probability_of_success,
                gamma: doc.constraints.min_assignment_probability,
            },
            initial,
            overrides,
            loc_index,
            task_index,
            agent_index,
            group_index,
            adjacency: Vec::new(),
            shortest: Vec::new(),
        };
        spec.rebuild_graph();
        Ok(spec)
    }

    fn rebuild_graph(&mut self) {
        let n = self.locations.len();
        let mut adjacency = vec![Vec::new(); n];
        for p in &self.paths {
            adjacency[p.start.ix()].push((p.end, p.distance));
            adjacency[p.end.ix()].push((p.start, p.distance));
        }
        for row in &mut adjacency {
            row.sort_by_key(|(l, _)| *l);
        }
        let mut shortest = vec![f64::INFINITY; n * n];
        for i in 0..n {
            shortest[i * n + i] = 0.0;
            for &(j, d) in &adjacency[i] {
                shortest[i * n + j.ix()] = shortest[i * n + j.ix()].min(d);
            }
        }
        for k in 0..n {
            for i in 0..n {
                let ik = shortest[i * n + k];
                if ik.is_infinite() {
                    continue;
                }
                for j in 0..n {
                    let via = ik + shortest[k * n + j];
                    if via < shortest[i * n + j] {
                        shortest[i * n + j] = via;
                    }
                }
            }
        }
        self.adjacency = adjacency;
        self.shortest = shortest;
    }

    /// Canonical document for this specification.
    pub fn to_document(&self) -> SpecDocument {
        let loc = |l: LocIx| self.locations[l.ix()].id.clone();
        SpecDocument {
            locations: self
                .locations
                .iter()
                .map(|l| LocationDoc { id: l.id.clone(), description: l.description.clone() })
                .collect(),
            paths: self
                .paths
                .iter()
                .map(|p| PathDoc {
                    start: loc(p.start),
                    end: loc(p.end),
                    distance: p.distance,
                    description: p.description.clone(),
                })
                .collect(),
            tasks: self
                .groups
                .iter()
                .map(|g| TaskGroupDoc {
                    id: g.id.clone(),
                    description: g.description.clone(),
                    instances: g
                        .members
                        .iter()
                        .map(|t| TaskInstanceDoc { id: self.task(*t).id.clone(), location: loc(self.task(*t).location) })
                        .collect(),
                })
                .collect(),
            agents: self
                .agents
                .iter()
                .enumerate()
                .map(|(i, a)| AgentDoc {
                    id: a.id.clone(),
                    kind: a.kind,
                    start: Some(loc(self.initial.agent_loc[i])),
                    tasks: a
                        .capabilities
                        .iter()
                        .map(|c| CapabilityDoc {
                            id: self.groups[c.group.ix()].id.clone(),
                            cost: c.cost,
                            p_success: c.p_success,
                            retries: c.max_retries as i64,
                        })
                        .collect(),
                })
                .collect(),
            constraints: ConstraintsDoc {
                mission_probability_of_success: self.constraints.p_succ,
                min_assignment_probability: self.constraints.gamma,
            },
            completed_tasks: self
                .task_indices()
                .filter(|t| !self.initial.pending.contains(t))
                .map(|t| self.task(t).id.clone())
                .collect(),
            overrides: self
                .overrides
                .iter()
                .map(|(&(a, t), &p)| OverrideDoc { agent: self.agent(a).id.clone(), task: self.task(t).id.clone(), p_success: p })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("spec documents always serialize")
    }

    /// Violations of the resolved specification (warnings only, since
    /// construction already rejected errors).
    pub fn validate(&self) -> Vec<Violation> {
        validate_document(&self.to_document())
    }

    // --- accessors --------------------------------------------------------

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    /// Declared paths (one direction each).
    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn groups(&self) -> &[TaskGroup] {
        &self.groups
    }

    pub fn tasks(&self) -> &[TaskInstance] {
        &self.tasks
    }

    pub fn constraints(&self) -> MissionConstraints {
        self.constraints
    }

    pub fn objectives(&self) -> [Objective; 2] {
        [Objective::MinimizeCost, Objective::MaximizeSuccess]
    }

    pub fn initial(&self) -> &InitialConfig {
        &self.initial
    }

    // --- lookups ----------------------------------------------------------

    pub fn agent(&self, a: AgentIx) -> &Agent {
        &self.agents[a.ix()]
    }

    pub fn location(&self, l: LocIx) -> &Location {
        &self.locations[l.ix()]
    }

    pub fn task(&self, t: TaskIx) -> &TaskInstance {
        &self.tasks[t.ix()]
    }

    pub fn group(&self, g: GroupIx) -> &TaskGroup {
        &self.groups[g.ix()]
    }

    pub fn agent_by_id(&self, id: &str) -> Option<AgentIx> {
        self.agent_index.get(id).copied()
    }

    pub fn location_by_id(&self, id: &str) -> Option<LocIx> {
        self.loc_index.get(id).copied()
    }

    pub fn task_by_id(&self, id: &str) -> Option<TaskIx> {
        self.task_index.get(id).copied()
    }

    pub fn group_by_id(&self, id: &str) -> Option<GroupIx> {
        self.group_index.get(id).copied()
    }

    pub fn agent_indices(&self) -> impl Iterator<Item = AgentIx> {
        (0..self.agents.len() as u16).map(AgentIx)
    }

    pub fn task_indices(&self) -> impl Iterator<Item = TaskIx> {
        (0..self.tasks.len() as u16).map(TaskIx)
    }

    pub fn location_indices(&self) -> impl Iterator<Item = LocIx> {
        (0..self.locations.len() as u16).map(LocIx)
    }

    /// Direct path distance between two locations, in either direction.
    pub fn distance(&self, from: LocIx, to: LocIx) -> Option<f64> {
        self.adjacency[from.ix()].iter().find(|(l, _)| *l == to).map(|(_, d)| *d)
    }

    pub fn has_path(&self, from: LocIx, to: LocIx) -> bool {
        self.distance(from, to).is_some()
    }

    /// Neighbours of a location in the symmetric path relation, sorted.
    pub fn neighbours(&self, l: LocIx) -> &[(LocIx, f64)] {
        &self.adjacency[l.ix()]
    }

    /// Shortest-path distance; infinite when disconnected.
    pub fn shortest_distance(&self, from: LocIx, to: LocIx) -> f64 {
        self.shortest[from.ix() * self.locations.len() + to.ix()]
    }

    pub fn capability(&self, a: AgentIx, t: TaskIx) -> Option<&Capability> {
        let g = self.task(t).group;
        self.agent(a).capabilities.iter().find(|c| c.group == g)
    }

    /// PSuccess(a, t); zero for groups the agent has no capability for.
    pub fn p_success(&self, a: AgentIx, t: TaskIx) -> f64 {
        if let Some(p) = self.overrides.get(&(a, t)) {
            return *p;
        }
        self.capability(a, t).map_or(0.0, |c| c.p_success)
    }

    /// CostT(a, t); zero without capability.
    pub fn task_cost(&self, a: AgentIx, t: TaskIx) -> f64 {
        self.capability(a, t).map_or(0.0, |c| c.cost)
    }

    /// Retry(a, t); zero without capability.
    pub fn max_retries(&self, a: AgentIx, t: TaskIx) -> u32 {
        self.capability(a, t).map_or(0, |c| c.max_retries)
    }

    /// The agent may be allocated the task.
    pub fn can_allocate(&self, a: AgentIx, t: TaskIx) -> bool {
        self.p_success(a, t) >= self.constraints.gamma
    }

    pub fn overrides(&self) -> &BTreeMap<(AgentIx, TaskIx), f64> {
        &self.overrides
    }

    // --- derived specifications (knowledge-base updates) -----------------

    pub fn with_constraints(&self, constraints: MissionConstraints) -> Self {
        let mut s = self.clone();
        s.constraints = constraints;
        s
    }

    /// Records a per-instance success probability for one agent.
    pub fn with_success_override(&self, a: AgentIx, t: TaskIx, p: f64) -> Self {
        let mut s = self.clone();
        s.overrides.insert((a, t), p);
        s
    }

    /// Same world and agents, starting from another configuration.
    pub fn with_initial(&self, agent_loc: Vec<LocIx>, pending: BTreeSet<TaskIx>) -> Self {
        assert_eq!(agent_loc.len(), self.agents.len(), "one location per agent");
        let mut s = self.clone();
        s.initial = InitialConfig { agent_loc, pending };
        s
    }
}
