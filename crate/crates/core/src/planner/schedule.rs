//! Turning the sequential trace into a parallel, one-action-per-time-unit
//! schedule.
//!
//! Each action starts as early as its agent is free. A Move additionally
//! waits until every earlier (in trace order) Move touching the same
//! location has finished, so each location sees its arrivals and departures
//! in trace order. Since the trace itself is valid sequentially, the schedule
//! never puts two agents on one location and cannot deadlock. Depots are
//! exempt because several agents share them from the start.

use crate::spec::ProblemSpec;
use crate::world::{depots, Action};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Act(Action),
    Wait,
}

impl Slot {
    pub fn action(&self) -> Option<&Action> {
        match self {
            Slot::Act(a) => Some(a),
            Slot::Wait => None,
        }
    }
}

pub fn timed_schedule(spec: &ProblemSpec, trace: &[Action]) -> Vec<Vec<Slot>> {
    let depots = depots(spec);
    let mut timed: Vec<Vec<Slot>> = vec![Vec::new(); spec.agents().len()];
    let mut last_touch: Vec<Option<usize>> = vec![None; spec.locations().len()];

    for action in trace {
        let lane = &mut timed[action.agent().ix()];
        let mut slot = lane.len();
        if let Action::Move { from, to, .. } = *action {
            for l in [from, to] {
                if depots.contains(&l) {
                    continue;
                }
                if let Some(t) = last_touch[l.ix()] {
                    slot = slot.max(t + 1);
                }
            }
            for l in [from, to] {
                if !depots.contains(&l) {
                    last_touch[l.ix()] = Some(slot);
                }
            }
        }
        lane.resize(slot, Slot::Wait);
        lane.push(Slot::Act(*action));
    }
    timed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planner::vineyard_reference_plan;

    #[test]
    fn reference_plan_schedule() {
        let spec = fixtures::vineyard();
        let plan = vineyard_reference_plan(&spec);
        let w2 = spec.agent_by_id("w2").unwrap();
        let r1 = spec.agent_by_id("r1").unwrap();
        // w2 never waits: it is first through every location it uses
        assert_eq!(plan.timed[w2.ix()].len(), 12);
        assert!(plan.timed[w2.ix()].iter().all(|s| *s != Slot::Wait));
        // r1 enters l4 only after w2 has left it (w2 leaves at slot 3)
        let first_act = plan.timed[r1.ix()].iter().position(|s| *s != Slot::Wait).unwrap();
        assert_eq!(first_act, 4);
        for (lane, acts) in plan.timed.iter().zip(&plan.per_agent) {
            let flat: Vec<_> = lane.iter().filter_map(Slot::action).copied().collect();
            assert_eq!(&flat, acts);
        }
    }
}
