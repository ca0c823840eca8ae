//! PRISM-language export of the parametric model, with EvoChecker-style
//! `evolve` declarations for budgets that are still free.

use std::fmt::Write as _;

use super::{ExhaustCost, ModelError, ParametricPlanModel, RetryAssignment, Step};

fn ident(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Guarded-command model text. Without an assignment the budgets are
/// declared as `evolve` parameters over their ranges.
pub fn export_model_source(model: &ParametricPlanModel, assignment: Option<&RetryAssignment>) -> Result<String, ModelError> {
    if model.chains.is_empty() {
        return Err(ModelError::Degenerate("the plan assigns no actions to any agent".into()));
    }
    if let Some(a) = assignment {
        model.check(a)?;
    }
    let mut s = String::from("dtmc\n\n");

    for (i, slot) in model.slots.iter().enumerate() {
        let name = format!("X_{}_{}", ident(&slot.agent_id), ident(&slot.task_id));
        match assignment {
            Some(a) => {
                let _ = writeln!(s, "const int {name} = {};", a.0[i]);
            }
            None => {
                let _ = writeln!(s, "evolve int {name} [{}..{}];", slot.lo, slot.hi);
            }
        }
    }
    if !model.slots.is_empty() {
        s.push('\n');
    }
    for chain in &model.chains {
        let ag = ident(&chain.agent_id);
        for step in &chain.steps {
            if let Step::Do { task_id, p, .. } = step {
                let _ = writeln!(s, "const double p_{ag}_{} = {};", ident(task_id), num(*p));
            }
        }
    }
    s.push('\n');
    for chain in &model.chains {
        let ag = ident(&chain.agent_id);
        let n = chain.n_act();
        let _ = writeln!(s, "formula Final_{ag} = c_{ag} = {n};");
        let _ = writeln!(s, "formula Fail_{ag} = c_{ag} = {};", n + 1);
    }
    s.push('\n');

    for chain in &model.chains {
        let ag = ident(&chain.agent_id);
        let n = chain.n_act();
        let _ = writeln!(s, "module {ag}");
        let _ = writeln!(s, "  c_{ag} : [0..{}] init 0;", n + 1);
        for &si in &chain.slots {
            let slot = &model.slots[si];
            let _ = writeln!(s, "  x_{ag}_{} : [0..{}] init {};", ident(&slot.task_id), slot.hi, slot.consumed);
        }
        for (c, step) in chain.steps.iter().enumerate() {
            match step {
                Step::Move { .. } => {
                    let _ = writeln!(s, "  [{ag}_move_{c}] c_{ag} = {c} -> 1 : (c_{ag}' = {});", c + 1);
                }
                Step::Do { task_id, slot: None, .. } => {
                    let t = ident(task_id);
                    let _ = writeln!(
                        s,
                        "  [{ag}_do_{c}] c_{ag} = {c} -> p_{ag}_{t} : (c_{ag}' = {}) + 1 - p_{ag}_{t} : (c_{ag}' = {});",
                        c + 1,
                        n + 1
                    );
                }
                Step::Do { task_id, slot: Some(_), .. } => {
                    let t = ident(task_id);
                    let x = format!("x_{ag}_{t}");
                    let bound = format!("X_{ag}_{t}");
                    let _ = writeln!(
                        s,
                        "  [{ag}_do_{c}] c_{ag} = {c} & {x} < {bound} -> p_{ag}_{t} : (c_{ag}' = {}) + 1 - p_{ag}_{t} : ({x}' = {x} + 1);",
                        c + 1
                    );
                    let _ = writeln!(s, "  [{ag}_exhaust_{c}] c_{ag} = {c} & {x} >= {bound} -> 1 : (c_{ag}' = {});", n + 1);
                }
            }
        }
        let _ = writeln!(s, "  [] Final_{ag} | Fail_{ag} -> 1 : true;");
        s.push_str("endmodule\n\n");
    }

    s.push_str("rewards \"cost\"\n");
    for chain in &model.chains {
        let ag = ident(&chain.agent_id);
        for (c, step) in chain.steps.iter().enumerate() {
            match step {
                Step::Move { cost, .. } => {
                    let _ = writeln!(s, "  [{ag}_move_{c}] true : {};", num(*cost));
                }
                Step::Do { cost, slot, .. } => {
                    let _ = writeln!(s, "  [{ag}_do_{c}] true : {};", num(*cost));
                    if slot.is_some() && model.exhaust == ExhaustCost::Charge {
                        let _ = writeln!(s, "  [{ag}_exhaust_{c}] true : {};", num(*cost));
                    }
                }
            }
        }
    }
    s.push_str("endrewards\n\n");

    let finals: Vec<String> = model.chains.iter().map(|c| format!("Final_{}", ident(&c.agent_id))).collect();
    let dones: Vec<String> = model
        .chains
        .iter()
        .map(|c| {
            let ag = ident(&c.agent_id);
            format!("(Final_{ag} | Fail_{ag})")
        })
        .collect();
    let _ = writeln!(s, "label \"success\" = {};", finals.join(" & "));
    let _ = writeln!(s, "label \"done\" = {};", dones.join(" & "));
    Ok(s)
}

/// Constraint and objectives as PCTL properties.
pub fn export_properties(model: &ParametricPlanModel) -> String {
    let mut s = String::new();
    s.push_str("// constraint: mission success probability\n");
    let _ = writeln!(s, "P>={} [ F \"success\" ]", num(model.p_succ));
    s.push_str("// objective: minimise expected cost\n");
    s.push_str("R{\"cost\"}=? [ F \"done\" ]\n");
    s.push_str("// objective: maximise success probability\n");
    s.push_str("P=? [ F \"success\" ]\n");
    s
}
