//! PDDL 2.1 export, plus a small reader able to ground our own exports.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::spec::ProblemSpec;

fn unit_distances(spec: &ProblemSpec) -> bool {
    spec.paths().iter().all(|p| p.distance == 1.0)
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Domain file: two action schemas, `move` and `do`.
pub fn export_pddl_domain(spec: &ProblemSpec) -> String {
    let unit = unit_distances(spec);
    let gamma = num(spec.constraints().gamma);
    let mut s = String::new();
    s.push_str("(define (domain hybrid-mission)\n");
    s.push_str("  (:requirements :strips :typing :negative-preconditions :numeric-fluents)\n");
    s.push_str("  (:types location task agent)\n");
    s.push_str("  (:predicates\n");
    s.push_str("    (agent_at ?a - agent ?l - location)\n");
    s.push_str("    (path ?from - location ?to - location)\n");
    s.push_str("    (empty ?l - location)\n");
    s.push_str("    (task_loc ?t - task ?l - location)\n");
    s.push_str("    (task_done ?t - task))\n");
    s.push_str("  (:functions\n");
    s.push_str("    (p_success ?a - agent ?t - task)\n");
    if unit {
        s.push_str("    (travel_dist))\n");
    } else {
        s.push_str("    (travel_dist)\n");
        s.push_str("    (distance ?from - location ?to - location))\n");
    }
    s.push_str("  (:action move\n");
    s.push_str("    :parameters (?a - agent ?from - location ?to - location)\n");
    s.push_str("    :precondition (and (path ?from ?to) (agent_at ?a ?from) (empty ?to))\n");
    s.push_str("    :effect (and (not (agent_at ?a ?from)) (agent_at ?a ?to) (empty ?from) (not (empty ?to))\n");
    if unit {
        s.push_str("      (increase (travel_dist) 1)))\n");
    } else {
        s.push_str("      (increase (travel_dist) (distance ?from ?to))))\n");
    }
    s.push_str("  (:action do\n");
    s.push_str("    :parameters (?a - agent ?t - task ?l - location)\n");
    let _ = writeln!(
        s,
        "    :precondition (and (agent_at ?a ?l) (task_loc ?t ?l) (not (task_done ?t)) (>= (p_success ?a ?t) {gamma}))"
    );
    s.push_str("    :effect (task_done ?t)))\n");
    s
}

/// Problem file for the spec's initial configuration.
pub fn export_pddl_problem(spec: &ProblemSpec) -> String {
    let unit = unit_distances(spec);
    let init = spec.initial();
    let mut s = String::new();
    s.push_str("(define (problem mission)\n");
    s.push_str("  (:domain hybrid-mission)\n");
    s.push_str("  (:objects\n");
    let ids = |it: Vec<&str>| it.join(" ");
    let _ = writeln!(s, "    {} - location", ids(spec.locations().iter().map(|l| l.id.as_str()).collect()));
    if !spec.tasks().is_empty() {
        let _ = writeln!(s, "    {} - task", ids(spec.tasks().iter().map(|t| t.id.as_str()).collect()));
    }
    if !spec.agents().is_empty() {
        let _ = writeln!(s, "    {} - agent", ids(spec.agents().iter().map(|a| a.id.as_str()).collect()));
    }
    s.push_str("  )\n");
    s.push_str("  (:init\n");
    s.push_str("    (= (travel_dist) 0)\n");
    for p in spec.paths() {
        let (a, b) = (&spec.location(p.start).id, &spec.location(p.end).id);
        let _ = writeln!(s, "    (path {a} {b}) (path {b} {a})");
        if !unit {
            let d = num(p.distance);
            let _ = writeln!(s, "    (= (distance {a} {b}) {d}) (= (distance {b} {a}) {d})");
        }
    }
    for l in spec.location_indices() {
        if !init.agent_loc.contains(&l) {
            let _ = writeln!(s, "    (empty {})", spec.location(l).id);
        }
    }
    for t in spec.tasks() {
        let _ = writeln!(s, "    (task_loc {} {})", t.id, spec.location(t.location).id);
    }
    for t in spec.task_indices() {
        if !init.pending.contains(&t) {
            let _ = writeln!(s, "    (task_done {})", spec.task(t).id);
        }
    }
    for a in spec.agent_indices() {
        let _ = writeln!(s, "    (agent_at {} {})", spec.agent(a).id, spec.location(init.agent_loc[a.ix()]).id);
    }
    for a in spec.agent_indices() {
        for t in spec.task_indices() {
            let _ = writeln!(s, "    (= (p_success {} {}) {})", spec.agent(a).id, spec.task(t).id, num(spec.p_success(a, t)));
        }
    }
    s.push_str("  )\n");
    s.push_str("  (:goal (and");
    for t in spec.tasks() {
        let _ = write!(s, " (task_done {})", t.id);
    }
    s.push_str("))\n");
    s.push_str("  (:metric minimize (travel_dist)))\n");
    s
}

// ---------------------------------------------------------------------------
// Reader
// ---------------------------------------------------------------------------

#[derive(Debug, thiserror::Error)]
#[error("PDDL: {0}")]
pub struct PddlError(String);

#[derive(Clone, Debug, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(l) => Some(l),
            Sexp::Atom(_) => None,
        }
    }

    fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexp::atom)
    }
}

fn parse_sexp(text: &str) -> Result<Sexp, PddlError> {
    let mut tokens = Vec::new();
    for line in text.lines() {
        let line = line.split(';').next().unwrap_or("");
        let spaced = line.replace('(', " ( ").replace(')', " ) ");
        tokens.extend(spaced.split_whitespace().map(str::to_string));
    }
    let mut pos = 0;
    let e = read(&tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(PddlError("trailing tokens".into()));
    }
    Ok(e)
}

fn read(tokens: &[String], pos: &mut usize) -> Result<Sexp, PddlError> {
    let tok = tokens.get(*pos).ok_or_else(|| PddlError("unexpected end of input".into()))?;
    *pos += 1;
    match tok.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match tokens.get(*pos).map(String::as_str) {
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    Some(_) => items.push(read(tokens, pos)?),
                    None => return Err(PddlError("unbalanced parentheses".into())),
                }
            }
        }
        ")" => Err(PddlError("unexpected ')'".into())),
        _ => Ok(Sexp::Atom(tok.clone())),
    }
}

/// `?x ?y - type ?z - other` into (name, type) pairs.
fn typed_list(items: &[Sexp]) -> Result<Vec<(String, String)>, PddlError> {
    let mut out = Vec::new();
    let mut pending = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let a = items[i].atom().ok_or_else(|| PddlError("expected a name".into()))?;
        if a == "-" {
            let ty = items.get(i + 1).and_then(Sexp::atom).ok_or_else(|| PddlError("missing type".into()))?;
            out.extend(pending.drain(..).map(|n: String| (n, ty.to_string())));
            i += 2;
        } else {
            pending.push(a.to_string());
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|n| (n, "object".to_string())));
    Ok(out)
}

fn section<'a>(root: &'a [Sexp], key: &str) -> Option<&'a [Sexp]> {
    root.iter().find(|e| e.head() == Some(key)).and_then(Sexp::list).map(|l| &l[1..])
}

struct Schema {
    name: String,
    params: Vec<(String, String)>,
    pre: Sexp,
}

struct Problem {
    objects: Vec<(String, String)>,
    facts: BTreeSet<Vec<String>>,
    fluents: HashMap<Vec<String>, f64>,
}

fn read_domain(text: &str) -> Result<Vec<Schema>, PddlError> {
    let root = parse_sexp(text)?;
    let items = root.list().ok_or_else(|| PddlError("domain is not a list".into()))?;
    let mut out = Vec::new();
    for item in items.iter().filter(|e| e.head() == Some(":action")) {
        let l = item.list().unwrap_or_default();
        let name = l.get(1).and_then(Sexp::atom).ok_or_else(|| PddlError("action without name".into()))?;
        let mut params = Vec::new();
        let mut pre = Sexp::List(vec![Sexp::Atom("and".into())]);
        let mut i = 2;
        while i + 1 < l.len() {
            match l[i].atom() {
                Some(":parameters") => params = typed_list(l[i + 1].list().unwrap_or_default())?,
                Some(":precondition") => pre = l[i + 1].clone(),
                _ => {}
            }
            i += 2;
        }
        out.push(Schema { name: name.to_string(), params, pre });
    }
    Ok(out)
}

fn read_problem(text: &str) -> Result<Problem, PddlError> {
    let root = parse_sexp(text)?;
    let items = root.list().ok_or_else(|| PddlError("problem is not a list".into()))?;
    let objects = typed_list(section(items, ":objects").unwrap_or_default())?;
    let mut facts = BTreeSet::new();
    let mut fluents = HashMap::new();
    for f in section(items, ":init").unwrap_or_default() {
        let l = f.list().ok_or_else(|| PddlError("bad init entry".into()))?;
        if f.head() == Some("=") {
            let key: Vec<String> = l[1]
                .list()
                .ok_or_else(|| PddlError("bad fluent".into()))?
                .iter()
                .filter_map(|x| x.atom().map(str::to_string))
                .collect();
            let val: f64 = l
                .get(2)
                .and_then(Sexp::atom)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| PddlError("bad fluent value".into()))?;
            fluents.insert(key, val);
        } else {
            facts.insert(l.iter().filter_map(|x| x.atom().map(str::to_string)).collect());
        }
    }
    Ok(Problem { objects, facts, fluents })
}

fn subst(args: &[Sexp], binding: &BTreeMap<String, String>) -> Vec<String> {
    args.iter()
        .filter_map(Sexp::atom)
        .map(|a| binding.get(a).cloned().unwrap_or_else(|| a.to_string()))
        .collect()
}

fn holds(pre: &Sexp, binding: &BTreeMap<String, String>, p: &Problem) -> Result<bool, PddlError> {
    let l = pre.list().ok_or_else(|| PddlError("bad precondition".into()))?;
    match pre.head() {
        Some("and") => {
            for c in &l[1..] {
                if !holds(c, binding, p)? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Some("not") => Ok(!holds(&l[1], binding, p)?),
        Some(op @ (">=" | "<=" | ">" | "<" | "=")) => {
            let lhs = value(&l[1], binding, p)?;
            let rhs = value(&l[2], binding, p)?;
            Ok(match op {
                ">=" => lhs >= rhs,
                "<=" => lhs <= rhs,
                ">" => lhs > rhs,
                "<" => lhs < rhs,
                _ => lhs == rhs,
            })
        }
        Some(_) => Ok(p.facts.contains(&subst(l, binding))),
        None => Err(PddlError("empty precondition".into())),
    }
}

fn value(e: &Sexp, binding: &BTreeMap<String, String>, p: &Problem) -> Result<f64, PddlError> {
    match e {
        Sexp::Atom(a) => a.parse().map_err(|_| PddlError(format!("not a number: {a}"))),
        Sexp::List(l) => p
            .fluents
            .get(&subst(l, binding))
            .copied()
            .ok_or_else(|| PddlError(format!("undefined fluent {:?}", subst(l, binding)))),
    }
}

/// Grounds every action schema of `domain` against the initial state of
/// `problem` and returns the applicable ground actions, rendered as
/// `Move(agent, from, to)` / `Do(agent, task, location)`, sorted.
pub fn ground_initial_actions(domain: &str, problem: &str) -> Result<Vec<String>, PddlError> {
    let schemas = read_domain(domain)?;
    let prob = read_problem(problem)?;
    let mut out = Vec::new();
    for schema in &schemas {
        let candidates: Vec<Vec<&str>> = schema
            .params
            .iter()
            .map(|(_, ty)| prob.objects.iter().filter(|(_, t)| t == ty).map(|(n, _)| n.as_str()).collect())
            .collect();
        if candidates.iter().any(Vec::is_empty) {
            continue;
        }
        let mut idx = vec![0usize; candidates.len()];
        'bindings: loop {
            let binding: BTreeMap<String, String> = schema
                .params
                .iter()
                .zip(&idx)
                .zip(&candidates)
                .map(|(((name, _), &i), c)| (name.clone(), c[i].to_string()))
                .collect();
            if holds(&schema.pre, &binding, &prob)? {
                let args: Vec<&str> = schema.params.iter().map(|(n, _)| binding[n].as_str()).collect();
                let mut name = schema.name.clone();
                name[..1].make_ascii_uppercase();
                out.push(format!("{name}({})", args.join(", ")));
            }
            let mut k = idx.len();
            loop {
                if k == 0 {
                    break 'bindings;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < candidates[k].len() {
                    continue 'bindings;
                }
                idx[k] = 0;
            }
        }
    }
    out.sort();
    Ok(out)
}
