//! Gibbs measures on Brownian increment paths.
//!
//! Paths are stored as per-step increments on a uniform grid, energies are
//! pair integrals of a potential `W(ξ, t)` over the increments, and the
//! sampler draws from Wiener measure reweighted by `exp(−λ H_T)`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod energy;
pub mod error;
pub mod estimators;
pub mod numerics;
pub mod path;
pub mod potential;
pub mod runner;
pub mod sampler;

pub use error::{Error, Result};
