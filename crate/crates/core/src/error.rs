//! Error type shared across the crate.

use thiserror::Error;

/// Failures surfaced by model construction, synthesis, correction, recovery, and
/// the experiment runner.
#[derive(Debug, Error)]
pub enum Error {
    /// A user-supplied parameter or configuration is invalid.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A delay lies outside the fundamental interval `[0, period)`.
    #[error("delay {value} outside [0, {period})")]
    DelayOutOfRange { value: f64, period: f64 },

    /// The delay set makes the model structurally unidentifiable (duplicates or
    /// an effectively singular steering matrix).
    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    /// Sequence or matrix dimensions do not match.
    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// The pulse spectrum vanishes (or nearly vanishes) inside the working band.
    #[error("ill-conditioned pulse spectrum: {0}")]
    IllConditionedPulse(String),

    /// The front-end mixing matrix is numerically singular at a grid bin.
    #[error("front end singular at grid bin {bin}: {detail}")]
    FrontEndSingular { bin: usize, detail: String },

    /// Too few sampling channels for the requested number of paths.
    #[error("insufficient channels: p={p} cannot resolve k={k} paths")]
    InsufficientChannels { p: usize, k: usize },

    /// The correlation matrix does not expose the requested signal subspace.
    #[error("rank-deficient subspace: {0}")]
    RankDeficientSubspace(String),

    /// Division by pilot symbols hit one or more zero symbols.
    #[error("division guard: zero pilot symbols at indices {indices:?}")]
    DivisionGuard { indices: Vec<usize> },

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Reading or writing an artifact failed.
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    /// A configuration document could not be parsed.
    #[error("config parse failure: {0}")]
    ConfigParse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
