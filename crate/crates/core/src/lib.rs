//! Gaussian consensus processes: Lyapunov exponents of the discrete model, Monte Carlo
//! oracles for them, simulators for the discrete and continuous dynamics, and an
//! experiment harness.
//!
//! The analytic layer ([`special`], [`analytic`]) is generic over [`Real`]; the simulators
//! work in `f64`. The aliases below fix the scalar for everyday use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model_a;
pub mod model_b;
pub mod parallel;
pub mod random_matrix;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Params = analytic::ModelParams<f64>;
pub type RegimeF64 = analytic::Regime<f64>;
