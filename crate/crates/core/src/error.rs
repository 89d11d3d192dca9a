use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("n*d must be even (n={n}, d={d})")]
    OddDegreeSum { n: usize, d: usize },

    #[error("degree {d} must be below the node count {n}")]
    DegreeTooLarge { n: usize, d: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error(
        "girth {requested} is infeasible for a {d}-regular graph on {n} nodes (needs at least {moore_bound} nodes)"
    )]
    InfeasibleGirth {
        n: usize,
        d: usize,
        requested: usize,
        moore_bound: usize,
    },

    #[error("girth repair exhausted its budget of {budget} swaps; girth at exhaustion was {achieved}")]
    GirthRepairExhausted { budget: usize, achieved: usize },

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("walk length must be at least 1")]
    WalkTooShort,

    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),

    #[error("trace does not retain walks (light trace)")]
    LightTrace,

    #[error("parse error at {path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
