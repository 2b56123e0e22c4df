use thiserror::Error;

/// Errors surfaced by model construction, likelihood evaluation and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("individual {id}: {msg}")]
    InvalidRecord { id: usize, msg: String },

    #[error("population: {0}")]
    InvalidPopulation(String),

    #[error("individuals {a} and {b} share exactly coincident coordinates")]
    CoincidentPoints { a: usize, b: usize },

    #[error("non-finite infectivity rate for individual {id} at time {t}")]
    NonFiniteRate { id: usize, t: u32 },

    #[error("parameter out of support: {0}")]
    Domain(String),

    #[error("cluster assignment: {0}")]
    InvalidAssignment(String),

    #[error("model spec: {0}")]
    InvalidSpec(String),

    #[error("clustering: {0}")]
    Clustering(String),

    #[error("mcmc: {0}")]
    Mcmc(String),

    #[error("assessment: {0}")]
    Assessment(String),

    #[error("{path}: {msg}")]
    Format { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
