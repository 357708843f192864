use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("Newton iteration did not converge after {iterations} steps; residual trace {trace:?}")]
    NewtonDivergence { iterations: usize, trace: Vec<f64> },

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("singular bordered system ({0}); zero is not a simple eigenvalue of L(0)")]
    Singular(String),

    #[error("eigensolver failure at xi = {xi}")]
    Eigensolver { xi: f64 },

    #[error("critical curve tracking failed at xi = {xi}: {reason}")]
    Tracking { xi: f64, reason: String },

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("non-finite state after t = {last_good_time}")]
    BlowUp { last_good_time: f64 },

    #[error("transform-domain error: {0}")]
    TransformDomain(String),

    #[error("wavenumber {k} outside continued family range [{lo}, {hi}] (max |gamma_zeta| = {max_gamma_zeta})")]
    WavenumberRange {
        k: f64,
        lo: f64,
        hi: f64,
        max_gamma_zeta: f64,
    },

    #[error("phase extraction failed at zeta = {zeta}, t = {t}")]
    Extraction { zeta: f64, t: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Validation(_)
            | Error::Usage(_)
            | Error::Dependency(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            _ => 3,
        }
    }
}
