//! Simulation and Monte Carlo verification of photon-count noise in
//! discretized X-ray tomography.
//!
//! The forward model is an attenuation function on the unit disk
//! ([`phantoms`]), sampled on an arcsine/uniform grid of lines
//! ([`discretization`]). Each grid line receives a Poisson number of photons
//! ([`poisson`], [`observation`]), and the log-normalized counts are compared
//! against the exact transform through the statistics in [`statistics`].
//! [`experiments`] turns those statistics into seeded, reproducible tables.

pub mod cli;
pub mod discretization;
pub mod error;
pub mod experiments;
pub mod gof;
pub mod observation;
pub mod phantoms;
pub mod poisson;
pub mod quadrature;
pub mod reduce;
pub mod rng;
pub mod statistics;

pub use error::{Error, Result};
