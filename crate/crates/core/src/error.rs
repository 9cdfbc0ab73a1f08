use thiserror::Error;

/// Errors shared across the verification engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),

    #[error("LP solver failure: {0}")]
    SolverFailure(String),

    #[error("linear program is unbounded in {0}")]
    Unbounded(&'static str),

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error(
        "set distance requires enumerating 2^{dim} box vertices, above the cap of 2^{cap}; \
         restrict inputs to axis-aligned boxes or raise the cap"
    )]
    VertexCapExceeded { dim: usize, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("region too thin to split (all widths below {0:e})")]
    CannotSplit(f64),

    #[error("coverage estimation failed: no sample was accepted inside the input set")]
    DegenerateSampling,

    #[error(
        "real-time construction infeasible: min headroom {headroom} does not exceed build time {build_time}"
    )]
    InfeasibleDeadline { headroom: f64, build_time: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
