use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("pressure profile is not admissible: {0}")]
    NonAdmissibleProfile(String),
    #[error("negative field square: -(2/r^2) int s^2 p'(s) ds = {value:e} at r = {r}")]
    NegativeFieldSquare { r: f64, value: f64 },
    #[error("invalid equilibrium parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grading ratio {0} outside [1, 20]")]
    BadGrading(f64),
    #[error("function space does not match mode: {0}")]
    ModeSpaceMismatch(String),
    #[error("viscosity must be positive (epsilon = {epsilon}, delta = {delta})")]
    NonPositiveViscosity { epsilon: f64, delta: f64 },
    #[error("vacuum stiffness block is singular")]
    SingularVacuumBlock,
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("fixed-point bracket exhausted: s = {s} exceeds s_max with Phi = {phi}")]
    BracketExhausted { s: f64, phi: f64 },
    #[error("at least {needed} modes required, got {got}")]
    InsufficientModes { needed: usize, got: usize },
    #[error("time step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    ConfigValidation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code: 1 for rejected input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonAdmissibleProfile(_)
            | Error::NegativeFieldSquare { .. }
            | Error::InvalidParameter(_)
            | Error::InvalidGrid(_)
            | Error::BadGrading(_)
            | Error::ModeSpaceMismatch(_)
            | Error::NonPositiveViscosity { .. }
            | Error::ConfigParse(_)
            | Error::ConfigValidation(_)
            | Error::Io(_) => 1,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
