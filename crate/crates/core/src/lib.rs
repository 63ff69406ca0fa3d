//! Discontinuous Galerkin discretisation of the parabolic-elliptic
//! Keller-Segel system with a posteriori error estimators.

pub mod basis;
pub mod cli;
pub mod config;
pub mod discretization;
pub mod error;
pub mod estimators;
pub mod forms;
pub mod harness;
pub mod mesh;
pub mod multigrid;
pub mod norms;
pub mod output;
pub mod projection;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod timestepper;

pub use error::{Error, Result};
