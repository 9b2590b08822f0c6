use thiserror::Error;

/// Errors raised by the planner, simulator and scenario loader.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible state: {0}")]
    Infeasible(String),
    #[error("empty feasible region: {0}")]
    EmptyRegion(String),
    #[error("stale decision: planned at step {planned}, world is at step {world}")]
    Stale { planned: u64, world: u64 },
    #[error("initialization failed: {0}")]
    Init(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario validation error: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
