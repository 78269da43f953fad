//! Trainable morphological networks over the max-plus (tropical) semiring.
//!
//! A morphological neuron replaces the dot product of a linear neuron with a
//! dilation `max_k(x_k + s_k)` or an erosion `min_k(x_k - s_k)`, where the
//! structuring element `s` is the learned parameter. A *morphological block*
//! is a layer of such neurons followed by a linear combination of their
//! outputs; stacking blocks gives a Morph-Net.
//!
//! The crate has four parts:
//!
//! - [`tropical`]: scalar dilation/erosion, their log-sum-exp relaxations
//!   with hardness `beta`, analytic gradients, and max-plus matrix algebra.
//! - [`network`]: layers, forward/backward passes, losses (MSE, BCE, DSSIM),
//!   optimizers, and a deterministic training loop, plus JSON model I/O.
//! - Analysis: [`hinge`] rewrites a trained block as a signed sum of
//!   multi-order hinge functions and enumerates its linear regions;
//!   [`constructor`] emits exact two-layer Morph-Nets for arbitrary hinge
//!   sums over a compact box; [`rewrite`] collapses pure dilation/erosion
//!   chains via max-plus matrix products and searches for sublevel-set
//!   witnesses separating architectures that are *not* equivalent.
//! - 2D: [`morph2d`] provides sliding-window dilation/erosion, morphological
//!   blocks on images, pooling/upsampling plumbing, and the haze-model
//!   reconstruction `min((I - K)/t, 1)`; [`pgm`] reads and writes PGM images.
//!
//! All numeric code is generic over the scalar type through [`scalar::Real`]
//! (implemented for `f32` and `f64`); the crate root exports `*64` aliases
//! for the common double-precision instantiation.

pub mod constructor;
pub mod dataset;
pub mod error;
pub mod hinge;
pub mod matrix;
pub mod morph2d;
pub mod network;
pub mod parallel;
pub mod pgm;
pub mod rewrite;
pub mod scalar;
pub mod tropical;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision instantiations of the core types.
pub type Vector64 = tropical::Vector<f64>;
pub type TropicalMatrix64 = tropical::TropicalMatrix<f64>;
pub type Matrix64 = matrix::Matrix<f64>;
pub type Network64 = network::Network<f64>;
pub type ImageGrid64 = morph2d::ImageGrid<f64>;
pub type Dataset64 = dataset::Dataset<f64>;

/// Single-precision instantiations.
pub type Vector32 = tropical::Vector<f32>;
pub type Network32 = network::Network<f32>;
pub type ImageGrid32 = morph2d::ImageGrid<f32>;
