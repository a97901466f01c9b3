//! Signal-noise data model, two-layer polynomial-ReLU network, standard and
//! label-noise gradient descent, and the exact signal/noise coefficient
//! decomposition of the trained filters.

pub mod cli_io;
pub mod data;
pub mod decomposition;
pub mod error;
pub mod experiments;
pub mod network;
pub mod rng;
pub mod theory;
pub mod trainer;

pub use error::{LabError, Result};
