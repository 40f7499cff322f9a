use thiserror::Error;

/// Errors raised by model construction, solvers and the scenario front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Picard iteration did not converge: {0}")]
    Convergence(String),

    #[error("step size underflow at t = {time}: {hint}")]
    Stiffness { time: f64, hint: String },

    #[error("assumptions unverified: {0}")]
    Unverified(String),

    #[error("trajectory schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
