use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("no bracket: {0}")]
    NoBracket(String),
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("spectral failure: {0}")]
    SpectralFailure(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("validity window: {0}")]
    Validity(String),
    #[error("recursion drift: {0}")]
    RecursionDrift(String),
    #[error("instability: {0}")]
    Instability(String),
    #[error("modulation window: {0}")]
    OutOfWindow(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl LabError {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            LabError::NoBracket(_)
                | LabError::NonConvergence(_)
                | LabError::SpectralFailure(_)
                | LabError::SingularSystem(_)
                | LabError::Validity(_)
                | LabError::RecursionDrift(_)
                | LabError::Instability(_)
                | LabError::OutOfWindow(_)
        )
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
