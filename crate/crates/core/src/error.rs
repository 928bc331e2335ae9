use thiserror::Error;

/// Errors raised by the design library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A relaxed beamforming matrix delivers no power to its own user.
    #[error("degenerate solution: CU {cu} receives h^H W h = {gain:e}")]
    DegenerateSolution { cu: usize, gain: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A subproblem was reported infeasible (or otherwise unsolved) by the conic solver.
    #[error("{stage} subproblem not solved: {status:?}")]
    Subproblem {
        stage: &'static str,
        status: crate::sdp::SolveStatus,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
