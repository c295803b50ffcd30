//! Area-tilted random-walk bridges, the spectral theory of their transfer
//! operators, and the limiting Ferrari–Spohn diffusion.

pub mod banded;
pub mod bridge;
pub mod chain;
pub mod continuum;
pub mod error;
pub mod experiments;
pub mod harness;
pub mod io;
pub mod model;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
