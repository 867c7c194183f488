//! Stochastic voltage sensitivity analysis for radial distribution feeders.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod feeder;
pub mod hosting_capacity;
pub mod monte_carlo;
pub mod power_flow;
pub mod special;
pub mod st_pvsa;
pub mod vsa;

pub use error::{Error, Result};
