//! Stein's method for Poisson approximation in the moderate-deviation
//! regime: Poisson tails, the Stein solution for tail indicators, exact
//! laws of three classical count statistics, size-bias couplings,
//! dependency graphs, and numerical checks of the relative-error bounds.

pub mod bounds;
pub mod cli;
pub mod dependence;
pub mod error;
pub mod logspace;
pub mod models;
pub mod poisson;
pub mod rational;
pub mod report;
pub mod size_bias;
pub mod stein;

pub use error::{Error, Result};
