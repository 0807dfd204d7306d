//! Simulation, training and level-wise concatenation of small quantum codes
//! under single-qubit Pauli noise.

pub mod channels;
pub mod circuit;
pub mod error;
pub mod estimator;
pub mod level;
pub mod losses;
pub mod optim;
pub mod pipeline;
pub mod qsim;
pub mod rea;
pub mod report;
pub mod stabilizer;
pub mod train;

pub use error::{Error, Result};
