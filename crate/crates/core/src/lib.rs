//! Unified intra/inter learned video codec with diffusion-based implicit
//! alignment.
//!
//! A frame is mapped to a 4×-downsampled latent, coded by a conditional
//! variable-rate codec against an optional reference latent, range coded,
//! and reconstructed through a deterministic DDIM chain whose starting
//! state for predicted frames is a masked inversion of the reference.

pub mod config;
pub mod container;
pub mod diffusion;
pub mod entropy;
pub mod error;
pub mod gop;
pub mod harness;
pub mod latent;
pub mod rawio;
pub mod stvc;
pub mod tensor;

pub use error::{Dims, Error, Result};
pub use latent::{Frame, LatentTransform};
pub use tensor::LatentFeature;
