// SPDX-License-Identifier: Apache-2.0
//! Noisy non-Hermitian lattice sensors.
//!
//! A driven chain of `N` bosonic modes with nonreciprocal hopping `J e^{±A}`
//! reads out a perturbation `eps` coupling the last site's two quadratures.
//! This crate computes signal, noise and photon number in and beyond linear
//! response, certifies stability, checks and repairs the loss/gain
//! conditions that keep the noise at the vacuum level, and cross-checks
//! the numerics against closed forms and time-domain simulation.

pub mod cli;
pub mod conditions;
pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod params;
pub mod response;
pub mod scenarios;
pub mod stability;
pub mod sweep;
pub mod template;
pub mod timedomain;
pub mod validate;

pub use error::{Error, Result};
pub use model::{QuadratureGenerator, SensorModel};
pub use params::SensorParams;
pub use template::{CouplingTemplate, TemplateEntry};
