//! Stochastic simulation and analytic reference model of ghost imaging with
//! homodyne detection of twin beams from parametric down-conversion.

pub mod arrayfile;
pub mod artifacts;
pub mod config;
pub mod correlator;
pub mod error;
pub mod experiment;
pub mod gain;
pub mod homodyne;
pub mod lattice;
pub mod metrics;
pub mod optics;
pub mod oracle;
pub mod plot;
pub mod wigner;

#[cfg(test)]
mod ensemble;

pub use error::{Error, Result};
