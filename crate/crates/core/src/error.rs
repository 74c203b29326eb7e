use thiserror::Error;

/// Errors raised by the laboratory. Variants map onto the CLI exit codes via
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside the domain closure: {0}")]
    DomainMembership(String),
    #[error("singular input: {0}")]
    SingularInput(String),
    #[error("point outside the flattening chart: {0}")]
    ChartDomain(String),
    #[error("positivity violation: {0}")]
    Positivity(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("unsupported: {0}")]
    Capability(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("k-range does not cover the support: {0}")]
    Coverage(String),
    #[error("time below the kernel floor: {0}")]
    UnderflowGuard(String),
    #[error("hypothesis violated: {0}")]
    Precondition(String),
    #[error("divergent integral: {0}")]
    Divergent(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration problems,
    /// 3 for numerical failures and everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::InvalidParameter(_)
            | Error::Precondition(_)
            | Error::DomainMembership(_)
            | Error::Capability(_)
            | Error::Shape(_)
            | Error::Data(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
