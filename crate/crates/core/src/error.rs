use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("weight matrix has no eigenvalue above {tolerance} in the symmetric part of I - W")]
    DegenerateSpectrum { tolerance: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular matrix")]
    Singular,

    #[error("game mapping is not strongly monotone (min eigenvalue of symmetric part = {0})")]
    NotMonotone(f64),

    #[error("inadmissible parameters: {0}")]
    Inadmissible(String),

    #[error(
        "compressor {compressor} violates its declared constant: empirical {empirical} > declared {declared} + 3 * {std_err}"
    )]
    Certification {
        compressor: String,
        empirical: f64,
        declared: f64,
        std_err: f64,
    },

    #[error("run diverged at iteration {iteration}: {detail}")]
    Diverged { iteration: usize, detail: String },

    #[error("residual undefined: initial estimate already equals the equilibrium")]
    ZeroInitialResidual,

    #[error("{label} (seed {seed}): {source}")]
    Run {
        label: String,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
