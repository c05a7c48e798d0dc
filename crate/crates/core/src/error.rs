use thiserror::Error;

/// Errors raised by model construction, simulation, fitting and the
/// spectral/connectivity computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid time series: {0}")]
    InvalidData(String),

    #[error("model is not stable (companion spectral radius {radius:.6})")]
    Unstable { radius: f64 },

    #[error("innovation covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("innovation covariance is singular")]
    SingularCovariance,

    #[error("invalid channel pair ({receiver}, {sender}): {reason}")]
    InvalidPair {
        receiver: usize,
        sender: usize,
        reason: &'static str,
    },

    #[error("singular regression design (condition estimate {condition:.3e})")]
    SingularDesign { condition: f64 },

    #[error("insufficient data: {needed} samples needed, {available} available")]
    InsufficientData { needed: usize, available: usize },

    #[error("insufficient segments for periodogram: {segments} (need at least 2)")]
    InsufficientSegments { segments: usize },

    #[error("I - A(w) is singular at {frequency_hz} Hz")]
    SingularTransform { frequency_hz: f64 },

    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),

    #[error("channel {channel} has a non-positive spectrum at {frequency_hz} Hz")]
    DegenerateChannel { channel: usize, frequency_hz: f64 },

    #[error("inverse spectrum of channel {channel} has a non-positive diagonal at {frequency_hz} Hz")]
    DegenerateInverse { channel: usize, frequency_hz: f64 },

    #[error("self-regression of node {node} is not stable (spectral radius {radius:.6})")]
    IsolatedInstability { node: usize, radius: f64 },

    #[error("innovation variance of node {node} is not positive")]
    NonPositiveInnovation { node: usize },

    #[error("innovation covariance is not diagonal; set force_diagonal_noise to use NCR")]
    CorrelatedInnovations,

    #[error("column {sender} of I - A(w) vanishes at {frequency_hz} Hz")]
    DegenerateColumn { sender: usize, frequency_hz: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
