use thiserror::Error;

use crate::similarity::Field;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("physical grid [{have_min}, {have_max}] does not cover required range [{need_min}, {need_max}]")]
    InsufficientCoverage {
        have_min: f64,
        have_max: f64,
        need_min: f64,
        need_max: f64,
    },

    /// A Cole-Hopf or N-wave denominator reached zero or went negative.
    #[error("denominator not positive at xi = {xi} (value {margin})")]
    Positivity { xi: f64, margin: f64 },

    #[error("field does not decay at the boundary: |edge|/max = {ratio:e}")]
    BoundaryDecay { ratio: f64 },

    #[error("quadrature did not converge: interval budget exhausted, error estimate {estimate:e}")]
    Quadrature { estimate: f64 },

    #[error("iteration did not converge after {iterations} steps: {what}")]
    NoConvergence { iterations: usize, what: String },

    #[error("time step could not satisfy the CFL bound after {halvings} halvings (dt = {dt:e}, bound = {bound:e})")]
    Cfl { halvings: usize, dt: f64, bound: f64 },

    /// The solver produced a non-finite value; carries the last good snapshot.
    #[error("NaN detected at tau = {tau}; last good snapshot at tau = {last_good_tau}")]
    NaN {
        tau: f64,
        last_good_tau: f64,
        last_good: Box<Field>,
    },

    #[error("Cole-Hopf image is negative at {count} nodes (first at xi = {first_xi})")]
    NegativeImage { count: usize, first_xi: f64 },

    #[error("series has {got} points in window, need at least {need}")]
    InsufficientPoints { got: usize, need: usize },

    #[error("non-positive value {value} at tau = {tau}")]
    NonPositive { tau: f64, value: f64 },

    /// The distance threshold was never reached along a trajectory.
    #[error("threshold {threshold} never crossed; closest approach {closest} at tau = {tau}")]
    NeverCrossed { threshold: f64, closest: f64, tau: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
