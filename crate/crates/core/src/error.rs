use thiserror::Error;

/// Errors produced by model loading, channel algebra and the solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid pmf{context}: {reason}")]
    InvalidPmf { context: String, reason: String },

    #[error("component {component}: private map is not total or not onto the private alphabet: {reason}")]
    InvalidPrivateMap { component: usize, reason: String },

    #[error("task {task}: {reason}")]
    InvalidTask { task: usize, reason: String },

    #[error("infeasible model: task {task} requires gamma = {gamma} bits but the admissible range is [0, {max}]")]
    InfeasibleModel { task: usize, gamma: f64, max: f64 },

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid joint table: {0}")]
    InvalidJoint(String),

    #[error("empty index set")]
    EmptyIndexSet,

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("product alphabet of size {size} exceeds the cap of {cap} symbols")]
    CapExceeded { size: usize, cap: usize },

    #[error("alpha = {alpha} bits exceeds H(X) = {entropy} bits")]
    UnachievableAlpha { alpha: f64, entropy: f64 },

    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),

    #[error("allocation infeasible: tasks {0:?} cannot be met")]
    Infeasible(Vec<usize>),

    #[error("linear program failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
