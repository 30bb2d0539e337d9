//! Analytic quantities of the resonantly vibrating ideal 1D cavity:
//! slow-time Bogoliubov coefficients, quadrature squeezing, purity, photon
//! numbers and energy, thermal corrections, and photon-number
//! distributions, cross-validated against an independent ODE integration.
//!
//! All quantities are expressed in units of the fundamental mode frequency
//! (omega_1 = 1) as functions of the slow time tau or of the universal
//! kinematic parameter kappa.

pub mod bogoliubov;
pub mod error;
mod numeric;
pub mod specfun;

pub use error::{Error, Result};
