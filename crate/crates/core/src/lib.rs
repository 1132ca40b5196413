//! Viscous Burgers dynamics in similarity variables.
//!
//! The crate provides the explicit invariant-manifold families (diffusion
//! waves, diffusive N-waves, inviscid N-waves), the Cole–Hopf transform used
//! as an exact oracle, a conservative solver for the rescaled equation and the
//! diagnostics needed to measure metastable behaviour.

// `!(x > 0.0)` is the form that also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colehopf;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod manifolds;
pub mod numerics;
pub mod similarity;
pub mod solver;

pub use error::{Error, Result};
pub use manifolds::{DiffusionWaveParams, InviscidNWaveParams, NWaveParams};
pub use similarity::{Field, Grid, WeightExponent};
pub use solver::{SolverConfig, Trajectory};
