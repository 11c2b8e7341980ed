use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient (eigenvalue {eigenvalue:e} relative to largest {largest:e})")]
    RankDeficient { eigenvalue: f64, largest: f64 },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate eigengap: lambda_q - lambda_(q+1) = {0} (recovery target is ill-posed)")]
    DegenerateEigengap(f64),

    #[error("iterate diverged at step {step}")]
    Divergence { step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("component {index} failed: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
