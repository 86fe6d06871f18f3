// `!(x > 0.0)` guards are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod jump_sde;
pub mod lamperti;
pub mod levy_sim;
pub mod measures;
pub mod path;
pub mod quad;
pub mod rng;
pub mod stats;
pub mod validate;

pub use error::{Error, Result};
