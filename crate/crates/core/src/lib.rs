//! Simulation library for nonlinear Faraday rotation in an optically dense
//! alkali vapor under electromagnetically induced transparency.
//!
//! Two response models are provided: a closed-form four-state model
//! ([`analytic`]) and a 16-state density-matrix model of the Rb D1 line
//! ([`bloch`]) with thermal velocity averaging ([`doppler`]). Either one
//! feeds the field propagation ([`propagation`]) whose output is mapped to
//! polarimeter signals and magnetometric sensitivity ([`polarimetry`]).

// `!(x > 0.0)` is deliberate: NaN must fail the range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod angular;
pub mod bloch;
pub mod doppler;
pub mod engine;
pub mod error;
pub mod optimize;
pub mod polarimetry;
pub mod propagation;
pub mod units;
pub mod vapor;

pub use error::{Error, Result};
