pub mod bounds_rates;
pub mod cli_harness;
pub mod error;
pub mod numerics;
pub mod plot;
pub mod forward_spectral;
pub mod gl_kernel;
pub mod potentials;
pub mod reconstruct;
pub mod wkb;

pub use error::{Error, ErrorKind, Result};
