use thiserror::Error;

/// Errors raised by the simulation and fitting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("numeric range exceeded: {0}")]
    OutOfRange(String),

    #[error("singular scattering model: {0}")]
    SingularModel(String),

    #[error("no double-thermal mixture reproduces the measured levels: {0}")]
    NoSolution(String),

    #[error("flat likelihood: {0}")]
    FlatLikelihood(String),

    #[error(
        "ill-posed population inversion; levels {levels:?} are not resolved by the pulse schedule"
    )]
    IllPosed { levels: Vec<usize> },

    #[error("Fock truncation ceiling {ceiling} exceeded; N_max >= {required} is required")]
    Truncation { required: usize, ceiling: usize },

    #[error("fit did not converge (best objective {best_objective:.6e}): {reason}")]
    NonConvergence { best_objective: f64, reason: String },

    #[error("no fit possible: {0}")]
    NoFit(String),

    #[error(
        "continuous kick too large: <|alpha_k|^2> = {mean_sq:.3e} per step (must be < {limit})"
    )]
    KickTooLarge { mean_sq: f64, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
