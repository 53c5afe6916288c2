use thiserror::Error;

/// Errors raised by the estimation pipeline.
///
/// Every variant carries the name of the stage that produced it so the CLI can
/// print a module-prefixed diagnostic.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{module}: invalid input: {message}")]
    Input { module: &'static str, message: String },

    #[error("{module}: degenerate input: {message}")]
    Degenerate { module: &'static str, message: String },

    #[error("{module}: singular design: column {column} ({name}) is linearly dependent on the preceding columns")]
    SingularDesign {
        module: &'static str,
        column: usize,
        name: String,
    },

    #[error("{module}: optimizer did not converge after {iterations} iterations (best objective {best_value}, best parameters {best_params:?})")]
    Convergence {
        module: &'static str,
        iterations: usize,
        best_value: f64,
        best_params: Vec<f64>,
    },

    #[error("quantile: bootstrap unstable: {failed} of {total} iterations failed")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("quantile: fit at tau = {tau} failed: {source}")]
    AtQuantile {
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("io: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(module: &'static str, message: impl Into<String>) -> Self {
        Error::Input {
            module,
            message: message.into(),
        }
    }

    pub(crate) fn degenerate(module: &'static str, message: impl Into<String>) -> Self {
        Error::Degenerate {
            module,
            message: message.into(),
        }
    }

    /// Error class with quantile annotations removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtQuantile { source, .. } => source.root(),
            other => other,
        }
    }
}
