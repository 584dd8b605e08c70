//! Completely positive module maps between finite-dimensional C*-algebras.

pub mod actions;
pub mod algebra;
pub mod cli;
pub mod constructions;
pub mod cpcalc;
pub mod cpsolve;
pub mod dilation;
pub mod error;
pub mod extension;
pub mod feasibility;
pub mod io;
pub mod linalg;
pub mod suites;

pub use error::{Error, Result};
