//! Simulation and control planning for a magnetically reprogrammable
//! miniature soft robot: magnetization model, beam solvers, six-DOF field
//! synthesis, gaits, reprogramming, safety audits and scaling.

pub mod actuation;
pub mod beam_mech;
#[cfg(feature = "cli")]
pub mod cli;
pub mod config;
pub mod error;
pub mod fieldspace;
pub mod gaits;
pub mod io;
pub mod reprogram_thermal;
pub mod robot_model;
pub mod safety;
pub mod scaling;

pub use error::{Error, Result};

/// Vacuum permeability used for B to H conversion, H/m.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Coil capacity: flux density magnitude, T.
pub const COIL_MAX_B: f64 = 0.034;
/// Coil capacity: gradient magnitude per entry, T/m.
pub const COIL_MAX_GRAD: f64 = 0.4;
