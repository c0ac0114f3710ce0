//! Texture synthesis from shifted covariances of phase-rectified complex
//! wavelet coefficients.
//!
//! Pipeline: oriented wavelet transform -> phase-shifted rectifier ->
//! shifted covariance statistics -> L-BFGS descent on the statistic
//! mismatch starting from white noise.

pub mod error;
pub mod fft;
pub mod image;
pub mod io;
pub mod lbfgs;
pub mod oracles;
pub mod representation;
pub mod statistics;
pub mod synthesis;
pub mod wavelets;

pub use error::{Error, Result};
pub use image::{ColorImage, ImagePlane, Seed, Texture};
pub use statistics::{Boundary, StatisticsVector, Variant};
pub use synthesis::{synthesize, ModelConfig, SynthesisResult};
