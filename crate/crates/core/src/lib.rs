//! Fleming-Viot particle systems in intervals and rectangles, with genealogy
//! reconstruction, spine extraction and reference kernels for conditioned
//! Brownian motion.

pub mod acceptance;
pub mod analysis;
pub mod cli_io;
pub mod engine;
pub mod error;
pub mod genealogy;
pub mod geometry;
pub mod sampler;

pub use error::{Error, Result};
