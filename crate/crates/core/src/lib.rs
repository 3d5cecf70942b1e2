//! Stable reconstruction for finite-dimensional ill-posed linear inverse
//! problems: classical spectral filters, learned null-space corrections,
//! regularizers built from trained networks, and unrolled iteration schemes,
//! plus the deterministic experiment harness driving the `invreg` binary.

pub mod error;
pub mod filters;
pub mod geometry;
pub mod linops;
pub mod mat;
pub mod rng;

pub use error::{Error, Result};
