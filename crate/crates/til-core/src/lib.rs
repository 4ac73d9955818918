//! Twin-in-the-loop joint state and parameter estimation for road vehicles.
//!
//! A higher-fidelity vehicle simulator ([`twin`]) runs in closed loop with
//! measured signals. Its planar states are corrected with a sparse linear
//! gain and the deviations of mass and principal inertia are estimated with
//! sign-gated nonlinear laws ([`observer`]). Gains are tuned offline with
//! Bayesian optimization ([`tuner`]); a planar double-track observer
//! ([`benchmark`]) serves as the reference method.

pub mod benchmark;
pub mod error;
pub mod exec;
pub mod observer;
pub mod report;
pub mod rigid_body;
pub mod scenario;
pub mod sweep;
pub mod tuner;
pub mod twin;

pub use error::{Error, Result};
