//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by channel synthesis, codebook construction, quantization
/// and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An array dimension was zero or otherwise unusable.
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// An input value violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration field failed validation.
    #[error("config error: field `{field}`: {message}")]
    Config { field: String, message: String },

    /// The beam set's Gram matrix is numerically rank deficient
    /// (condition number above 1e12).
    #[error("degenerate beam set: Gram condition number {cond:.3e} exceeds 1e12")]
    DegenerateBeamSet { cond: f64 },

    /// Every candidate beam was excluded during a selection round.
    #[error("exhausted codebook: no admissible beam candidates remain")]
    ExhaustedCodebook,

    /// A matrix expected to be positive semi-definite was not.
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// The requested combiner codebook cannot be packed on the phase grid.
    #[error("infeasible packing: {requested} codewords requested but only {available} distinct equal-gain classes exist")]
    InfeasiblePacking { requested: usize, available: usize },

    /// More transmission layers were requested than selected beams.
    #[error("insufficient beams: rank {rank} exceeds beam count {beams}")]
    InsufficientBeams { rank: usize, beams: usize },

    /// No feedback split satisfies the budget.
    #[error("infeasible feedback budget: {0} bits")]
    InfeasibleBudget(u32),

    /// Comparison inputs do not share a common sweep.
    #[error("misaligned sweeps: {0}")]
    MisalignedSweeps(String),

    /// Payload decoding failed.
    #[error("payload error: {0}")]
    Payload(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
