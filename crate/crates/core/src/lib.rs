//! Hybrid task planning for missions shared by human workers and robots.
//!
//! The pipeline turns a JSON mission description into a travel-optimal plan
//! ([`planner`]), augments the plan with retry budgets and task success
//! probabilities ([`uncertainty`]), verifies the resulting Markov chains
//! exactly ([`pmc`]), searches for Pareto-optimal retry budgets
//! ([`synthesis`]) and keeps the deployed plan valid as the mission changes
//! ([`adapt`]). [`baseline`] builds the monolithic MDP used as a yardstick.

pub mod adapt;
pub mod baseline;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod planner;
pub mod pmc;
pub mod spec;
pub mod synthesis;
pub mod uncertainty;
pub mod world;

pub use error::{Error, Result};
pub use spec::{parse_problem_spec, AgentIx, GroupIx, LocIx, ProblemSpec, TaskIx};
pub use world::{Action, WorldState};
