use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Evaluation requested exactly at the gate excitation, where the
    /// effective potential diverges.
    #[error("singular evaluation at the gate position ({0} µm)")]
    Singular(f64),

    /// A pair channel violates the electric-dipole selection rules.
    #[error("selection rule violated for channel {channel}: {reason}")]
    SelectionRule { channel: String, reason: String },

    /// Invalid configuration or parameter set.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error(
        "quadrature did not converge on [{lower}, {upper}]: error estimate {error:.3e} \
         exceeds tolerance {tolerance:.3e} after {intervals} intervals"
    )]
    Quadrature {
        lower: f64,
        upper: f64,
        error: f64,
        tolerance: f64,
        intervals: usize,
    },

    /// Any other numerical failure (non-finite values, broken invariants).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("failed to parse channel data: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
