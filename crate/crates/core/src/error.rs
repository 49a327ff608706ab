use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("graph generation failed after {attempts} attempts (n={n}, d={d})")]
    GenerationFailed { n: usize, d: usize, attempts: usize },

    #[error("edge list line {line}: {message}")]
    EdgeList { line: usize, message: String },

    #[error("invalid placement: {0}")]
    Placement(String),

    #[error("invalid fault specification: {0}")]
    FaultSpec(String),

    #[error("graph is not connected; cover time is undefined")]
    Disconnected,

    #[error("operation requires a traced configuration")]
    TracingRequired,

    #[error("invalid legitimacy rule: {0}")]
    Rule(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("observer failed at round {round}: {message}")]
    Observer { round: u64, message: String },

    #[error("invalid expression {expr:?}: {message}")]
    Expression { expr: String, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("fit: {0}")]
    Fit(String),

    #[error("results schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from user input (flags, config, files) rather
    /// than a failure during simulation.
    pub fn is_usage(&self) -> bool {
        !matches!(
            self,
            Error::Observer { .. } | Error::GenerationFailed { .. } | Error::Io(_)
        )
    }
}
