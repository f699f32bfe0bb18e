pub mod bahadur;
pub mod basis;
pub mod cli;
pub mod config;
pub mod dgp;
pub mod error;
pub mod estimator;
pub mod kernel;
pub mod mc_lab;
pub mod population;
pub mod qdensity;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
