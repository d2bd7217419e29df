//! Spectral probing of motion-estimation filter banks: plane-wave stimuli,
//! Gabor fitting of measured response profiles, Fourier phase analysis of
//! dilation/rotation/occlusion, and an aperture-problem evaluation harness.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the common instantiations.

pub mod aperture;
pub mod error;
pub mod fitting;
pub mod gabor;
pub mod motion;
pub mod probe;
pub mod render;
pub mod scalar;
pub mod spectral;
pub mod stimuli;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use volume::{Extent, Volume};

pub type Volume64 = Volume<f64>;
pub type Volume32 = Volume<f32>;
pub type GaborParams64 = gabor::GaborParams<f64>;
pub type GaborParams32 = gabor::GaborParams<f32>;
