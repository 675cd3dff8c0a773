//! Simulation toolkit for unconventional photon blockade in a driven pair of
//! coupled Kerr cavities.

pub mod cli;
pub mod counting;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod fockspace;
pub mod frame;
pub mod ode;
pub mod state;
pub mod trajectories;

pub use error::{Result, UpbError};
pub use fockspace::{Cavity, HilbertSpace, QOperator};
pub use state::{DensityMatrix, QuantumState, WaveFunction};
