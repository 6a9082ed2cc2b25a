//! Component-by-component construction of mid-simplified p-adic shifts for
//! Halton sequences, with exact worst-case error evaluation in the weighted
//! anchored Sobolev space and a set of independent verification oracles.
//!
//! Module map:
//!
//! - [`padic`]: exact base-p digit arithmetic (radical inverse, Monna map, shifts)
//! - [`rational`]: exact rational coordinates
//! - [`halton`]: plain and shifted Halton point sets
//! - [`wce`]: squared worst-case error and the incremental product cache
//! - [`cbc`]: the greedy per-dimension shift search
//! - [`bounds`]: closed-form error bounds for random and CBC shifts
//! - [`verify`]: oracles and inequality sweeps
//! - [`cli`]: command-line driver

pub mod bounds;
pub mod cbc;
pub mod cli;
mod error;
pub mod halton;
pub mod padic;
pub mod rational;
pub mod sum;
pub mod verify;
pub mod wce;

pub use error::{Error, Result};
