//! Bundled mission files.
//!
//! The vineyard grid is a 3×3 layout (l1..l3 bottom row, l7..l9 top row)
//! with 4-neighbour unit-distance paths; the adjacency was reconstructed from
//! the moves used by the reference plan. The two small missions are
//! stand-ins for the first two benchmark instances, whose exact definitions
//! are not published.

use crate::spec::{parse_problem_spec, ProblemSpec};

pub const VINEYARD_JSON: &str = include_str!("../fixtures/vineyard.json");
pub const M1_ANALOGUE_JSON: &str = include_str!("../fixtures/m1_analogue.json");
pub const M2_ANALOGUE_JSON: &str = include_str!("../fixtures/m2_analogue.json");
/// Vineyard change script: two failures of t1l4, a relaxed success floor,
/// a drop in w2's identification reliability at l9, then a stricter
/// assignment threshold.
pub const REPLAY_SCENARIO_JSON: &str = include_str!("../fixtures/replay_scenario.json");

pub fn vineyard() -> ProblemSpec {
    parse_problem_spec(VINEYARD_JSON).expect("bundled vineyard fixture is valid")
}

/// 4×4 grid, one worker and one robot, three tasks, a single retry each.
pub fn m1_analogue() -> ProblemSpec {
    parse_problem_spec(M1_ANALOGUE_JSON).expect("bundled fixture is valid")
}

/// Three-location line where one robot identifies then monitors; two retry
/// slots with three budgets each.
pub fn m2_analogue() -> ProblemSpec {
    parse_problem_spec(M2_ANALOGUE_JSON).expect("bundled fixture is valid")
}

/// Reference vineyard plan (18 actions, travel cost 8), one action per line
/// in `Move(agent, from, to)` / `Do(agent, task, location)` notation.
pub const VINEYARD_REFERENCE_PLAN: &str = "\
Move(w2, l1, l4)
Do(w2, t1l4, l4)
Do(w2, t3l4, l4)
Move(w2, l4, l7)
Do(w2, t1l7, l7)
Do(w2, t3l7, l7)
Move(r1, l1, l4)
Move(r1, l4, l5)
Do(r1, t2l5, l5)
Move(w2, l7, l8)
Move(w2, l8, l9)
Move(r1, l5, l8)
Do(r1, t2l8a, l8)
Do(r1, t2l8b, l8)
Do(w2, t3l9, l9)
Move(w2, l9, l6)
Do(w2, t1l6b, l6)
Do(w2, t1l6a, l6)
";
