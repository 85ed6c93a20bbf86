//! Simulation and analysis of single-atom / single-photon polarization
//! entanglement: state generation under noise, STIRAP-style atomic analysis
//! with finite statistics, two-qubit tomography, entanglement metrics and
//! feasibility arithmetic for an event-ready Bell test.

pub mod bell;
pub mod calibration;
pub mod config;
pub mod error;
pub mod io;
pub mod measurement;
pub mod metrics;
pub mod parallel;
pub mod physics;
pub mod qmath;
pub mod tomography;

pub use error::{Error, Result};
