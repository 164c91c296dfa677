//! Pseudo-spectral IMEX solvers for thin-film and variable-mobility
//! Cahn-Hilliard equations.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod models;
pub mod runner;
pub mod snapshot;
pub mod splitting;
pub mod steppers;

pub use error::{Error, Result};
