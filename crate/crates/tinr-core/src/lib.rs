//! Texture compression with coordinate-based neural networks.
//!
//! A texture is overfit by a small MLP mapping normalized UV (optionally UVT
//! for mipmap pyramids) coordinates to RGB. The trained weights, serialized as
//! 32-bit floats in the TINR container, are the compressed asset. The crate
//! covers the full loop: corpus selection by Laplacian variance, dataset and
//! mipmap construction, training with Adam or Rprop, decoding, quality metrics,
//! rate-distortion sweeps, and a small software renderer that shades a sphere
//! straight from the network.

pub mod error;
pub mod eval;
pub mod image;
pub mod metrics;
pub mod network;
pub mod optim;
pub mod render;
pub mod select;
pub mod store;
pub mod sweep;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
