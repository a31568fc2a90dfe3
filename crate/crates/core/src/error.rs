use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("boom {boom}: anchor coincides with the shoulder, boom angle is undefined")]
    AnchorCoincident { boom: usize },

    #[error("boom {boom}: required extension {length:.4} m outside [{min}, {max}] m")]
    ExtensionOutOfRange {
        boom: usize,
        length: f64,
        min: f64,
        max: f64,
    },

    #[error("{}zero length, joint Jacobian is singular", .boom.map(|b| format!("boom {b}: ")).unwrap_or_default())]
    SingularBoom { boom: Option<usize> },

    #[error("grasp map has rank {rank} < 3, stance cannot resist arbitrary wrenches")]
    RankDeficient { rank: usize },

    #[error("{which} gain matrix is not symmetric positive definite (min eigenvalue {min_eigenvalue:e})")]
    GainNotPD {
        which: &'static str,
        min_eigenvalue: f64,
    },

    #[error("state magnitude {magnitude:e} exceeded the divergence bound")]
    IntegrationDiverged { magnitude: f64 },

    #[error("releasing boom {boom} would leave a rank-deficient stance")]
    StanceUnstable { boom: usize },

    #[error("invalid scenario at `{field}`: {reason}")]
    ScenarioInvalid { field: String, reason: String },

    #[error("waypoint {waypoint} not reached within the {budget_s} s budget{}", .mass_kg.map(|m| format!(" (mass {m} kg)")).unwrap_or_default())]
    NonConvergent {
        waypoint: usize,
        budget_s: f64,
        mass_kg: Option<f64>,
    },

    #[error("trace ended before waypoint {waypoint} was satisfied")]
    Incomplete { waypoint: usize },

    #[error("at t = {time:.3} s: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ScenarioInvalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Strips any [`Error::AtTime`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtTime { source, .. } => source.root(),
            other => other,
        }
    }
}
