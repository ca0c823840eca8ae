use crate::adapt::AdaptError;
use crate::baseline::BaselineError;
use crate::planner::PlanError;
use crate::pmc::PmcError;
use crate::spec::SpecError;
use crate::synthesis::SynthesisError;
use crate::uncertainty::ModelError;
use crate::world::WorldError;

/// Any failure raised by the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pmc(#[from] PmcError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    #[error(transparent)]
    Adapt(#[from] AdaptError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    /// Short machine-readable category, used in CLI error documents.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Spec(_) => "spec",
            Error::World(_) => "world",
            Error::Plan(PlanError::NoPlanExists) => "no_plan_exists",
            Error::Plan(PlanError::Timeout { .. }) => "timeout",
            Error::Plan(_) => "plan",
            Error::Model(_) => "model",
            Error::Pmc(_) => "pmc",
            Error::Synthesis(_) => "synthesis",
            Error::Adapt(AdaptError::Unrecoverable { .. }) => "unrecoverable",
            Error::Adapt(_) => "adapt",
            Error::Baseline(BaselineError::StateBudgetExceeded { .. }) => "state_budget_exceeded",
            Error::Baseline(_) => "baseline",
            Error::Io { .. } => "io",
            Error::Usage(_) => "usage",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
