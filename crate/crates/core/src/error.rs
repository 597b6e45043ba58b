use thiserror::Error;

/// Errors raised by the spectral routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value {value} in {context} at index {index}")]
    NonFinite {
        context: &'static str,
        index: usize,
        value: f64,
    },

    #[error("no sign change in bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    Bracket {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("spectral parameter z = {z} is not below {limit} ({context})")]
    Domain {
        context: &'static str,
        z: f64,
        limit: f64,
    },

    #[error("determinant {value} is not positive at grid node {node} (z = {z})")]
    NonPositiveDeterminant { node: usize, z: f64, value: f64 },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("lattice cutoff {cutoff} cannot be resolved by a grid with {n} points per axis")]
    Aliasing { cutoff: usize, n: usize },

    #[error("shell maximum {value:e} at radius {radius} is below the underflow floor")]
    Underflow { radius: usize, value: f64 },

    #[error("determinant sample {value:e} at distance {distance:e} is not positive")]
    Diagnostic { distance: f64, value: f64 },

    #[error("energy {energy} is stale: nearest Birman-Schwinger eigenvalue is {lambda}")]
    StaleEnergy { energy: f64, lambda: f64 },

    #[error("minimizer is not unique: separated minima at {first:?} and {second:?}")]
    AmbiguousMinimizer { first: Vec<f64>, second: Vec<f64> },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
