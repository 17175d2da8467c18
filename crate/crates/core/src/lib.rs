//! Super pseudo panels from repeated cross-sectional survey data.
//!
//! A conditional variational autoencoder learns `P(preferences | socio-economic,
//! external, geography, time)` from pooled cross-sections. A fixed base
//! population is then moved through the years by resampling each individual's
//! preference distribution from the trained model.

pub mod cvae;
pub mod data;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod nn;
pub mod oracle;
pub mod panel;
pub mod seed;

pub use error::{Error, Result};
