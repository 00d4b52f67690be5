use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported state: {0}")]
    UnsupportedState(String),

    #[error("unsupported potential: {0}")]
    UnsupportedPotential(String),

    /// The reference frame μ = ν = 0 carries no information.
    #[error("degenerate reference frame (mu = {mu}, nu = {nu})")]
    InvalidFrame { mu: f64, nu: f64 },

    #[error("singular time t = {0}")]
    SingularTime(f64),

    #[error("caustic at t = {t}: |sin| = {sin_abs:e} is below the threshold {threshold:e}")]
    Caustic { t: f64, sin_abs: f64, threshold: f64 },

    #[error("degenerate boundary-value problem: {0}")]
    DegenerateBoundaryValue(String),

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    /// True for errors caused by the numerical domain (caustics, singular
    /// times, degenerate problems) rather than by malformed input.
    pub fn is_numerical_domain(&self) -> bool {
        matches!(
            self,
            Error::SingularTime(_)
                | Error::Caustic { .. }
                | Error::DegenerateBoundaryValue(_)
                | Error::NonFinite(_)
                | Error::InvalidFrame { .. }
        )
    }

    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::UnsupportedState(_) => "unsupported_state",
            Error::UnsupportedPotential(_) => "unsupported_potential",
            Error::InvalidFrame { .. } => "invalid_frame",
            Error::SingularTime(_) => "singular_time",
            Error::Caustic { .. } => "caustic",
            Error::DegenerateBoundaryValue(_) => "degenerate_bvp",
            Error::NonFinite(_) => "non_finite",
            Error::Io(_) => "io",
            Error::Format(_) => "format",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
