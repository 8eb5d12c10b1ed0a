use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum RasError {
    /// Invalid or inconsistent configuration (bad flags, infeasible constraint sets).
    #[error("configuration error: {0}")]
    Config(String),

    /// Input violates a type invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Operation undefined for the given (otherwise valid) input.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The constrained least-squares solver stopped without meeting its KKT tolerance.
    #[error("solver did not converge after {iterations} iterations (KKT residual {residual:.3e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    /// Every simulation in a batch failed.
    #[error("all {0} simulations failed")]
    AllSimulationsFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RasError {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            RasError::NotConverged { .. } | RasError::AllSimulationsFailed(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, RasError>;

pub(crate) fn dim_check(what: &str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(RasError::Dimension(format!(
            "{what}: expected {expected}, found {found}"
        )));
    }
    Ok(())
}
