use thiserror::Error;

/// Errors raised by the filtering, inference, and experiment layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("weight collapse at step {step}: every particle has zero likelihood")]
    WeightCollapse { step: usize },

    #[error("observation symbol {symbol} at step {step} is outside the alphabet of size {alphabet}")]
    UnknownSymbol {
        step: usize,
        symbol: usize,
        alphabet: usize,
    },

    #[error("path enumeration needs {paths} paths, above the limit of {limit}")]
    EnumerationTooLarge { paths: f64, limit: usize },

    #[error("filter run did not retain per-step clouds")]
    MissingHistory,

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("{collapses} of {reps} replications collapsed")]
    ExperimentDegenerate { collapses: usize, reps: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
