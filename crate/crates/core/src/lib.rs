//! Numerical laboratory for unidirectional shallow-water equations in the
//! Camassa-Holm scaling: coefficient families, a leapfrog/Crank-Nicolson solver,
//! velocity/elevation reconstructions, Green-Naghdi residuals and breaking analysis.

pub mod asymptotics;
pub mod breaking;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod output;
pub mod params;
pub mod solver;

pub use error::{Error, Result};
