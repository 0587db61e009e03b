use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// The variants fall into three families that the command-line front end maps
/// onto distinct exit codes: configuration/parameter problems, physics problems
/// (no idle point, ambiguous labels), and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("no idle point: {0}")]
    NoIdlePoint(String),

    #[error("ambiguous state labeling: {0}")]
    AmbiguousLabel(String),

    #[error("missing label for bare state {0:?}")]
    MissingLabel(Vec<usize>),

    #[error("regime error: {0}")]
    Regime(String),

    #[error("resonance: {0}")]
    Resonance(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("pulse synthesis: {0}")]
    Pulse(String),

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("integration accuracy: {0}")]
    Integration(String),

    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
}

impl Error {
    /// True for errors that come from the physics of the problem rather than
    /// from bad input or a numerical breakdown.
    pub fn is_physics(&self) -> bool {
        matches!(
            self,
            Error::NoIdlePoint(_)
                | Error::AmbiguousLabel(_)
                | Error::MissingLabel(_)
                | Error::Regime(_)
                | Error::Resonance(_)
                | Error::Infeasible(_)
        )
    }

    pub fn is_parameter(&self) -> bool {
        matches!(self, Error::Parameter(_) | Error::DimensionOverflow { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
