//! Exact computations for the free boundary dimer model on half-plane square-lattice domains.

pub mod error;
pub mod fields;
pub mod kasteleyn;
pub mod lattice;
pub mod cli;
pub mod linalg;
pub mod mc;
pub mod potential;
pub mod walks;

pub use error::{Error, Result};
