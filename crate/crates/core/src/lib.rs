//! Exact simulation and average-Hamiltonian analysis of pulsed dynamical
//! decoupling on small dipolar-coupled spin-½ networks.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod magnus;
pub mod sequence;
pub mod spin_algebra;
pub mod trig;

pub use error::{Error, Result};
