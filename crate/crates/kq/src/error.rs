use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain parameters: {0}")]
    InvalidChain(String),
    #[error("invalid bath specification: {0}")]
    InvalidBath(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("adaptive quadrature did not converge for mode k={k} (budget {budget} subdivisions)")]
    QuadratureNonConvergence { k: f64, budget: usize },
    #[error("integration step underflow for mode k={k} at t={t}")]
    StepUnderflow { k: f64, t: f64 },
    #[error("covariance physicality violated for mode k={k} at t={t}: {detail}")]
    PhysicalityViolation { k: f64, t: f64, detail: String },
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("threshold never reached: {0}")]
    NotReached(String),
    #[error("degenerate shifted fit: t_w optimum at search boundary ({0})")]
    DegenerateFit(f64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidChain(_)
            | Error::InvalidBath(_)
            | Error::InvalidSchedule(_)
            | Error::InvalidConfig(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            _ => 3,
        }
    }
}
