use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("metric matrix must be {expected}x{expected} over distinct ids")]
    MatrixShape { expected: usize },
    #[error("distance between `{0}` and `{1}` is not a number")]
    BadDistance(String, String),
    #[error("edge ({0}, {1}) is not client-facility")]
    NotBipartite(String, String),
    #[error("edge ({0}, {1}) references a vertex out of range")]
    EdgeOutOfRange(usize, usize),
    #[error("center-mode clients must equal the facility set")]
    CenterMismatch,
    #[error("p = {p} exceeds the {clients} clients")]
    OutliersOutOfRange { p: usize, clients: usize },
    #[error("k = {k} exceeds the limit {limit}")]
    TooManyFacilities { k: usize, limit: usize },
    #[error("{0}")]
    Format(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlowError {
    #[error("capacity overflow")]
    Overflow,
    #[error("negative capacity on arc {0} -> {1}")]
    NegativeCapacity(usize, usize),
    #[error("arc {0} -> {1} enters the source or leaves the sink")]
    BadArc(usize, usize),
    #[error("node {0} out of range")]
    NodeOutOfRange(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("simplex did not converge within {0} pivots")]
    IterationLimit(usize),
    #[error("objective is unbounded")]
    Unbounded,
    #[error("returned point violates a constraint by {violation:e} (row `{row}`)")]
    Numerical { row: String, violation: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("{stage}: {detail}")]
    Stage { stage: &'static str, detail: String },
    #[error("oracle budget of {budget} flow computations exceeded (needs {needed})")]
    Budget { budget: u64, needed: u64 },
    #[error("variant `{variant}` cannot run on this instance: {reason}")]
    Variant {
        variant: &'static str,
        reason: String,
    },
}

impl Error {
    pub(crate) fn stage(stage: &'static str, detail: impl Into<String>) -> Self {
        Error::Stage {
            stage,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
