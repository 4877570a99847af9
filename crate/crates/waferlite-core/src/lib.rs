//! Core numerics for lightweight wafer-defect classifiers.
//!
//! Everything in this crate is pure computation over in-memory buffers:
//! dense tensors with reverse-mode gradients, the small CNN architectures
//! used by the experiment suite, a procedural generator for wafer-like
//! grayscale images, augmentation and oversampling transforms, and the
//! training loop. File formats, benchmarking and the CLI live in the
//! `waferlite` companion crate.
//!
//! The crate is `no_std`-compatible (with `alloc`) so the inference path
//! can be reused on small targets; float transcendentals go through
//! `libm` in both modes so results do not depend on the platform libm.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod augment;
pub mod dataset;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod image;
pub mod metrics;
pub mod ops;
pub mod rng;
pub mod scalar;
pub mod smote;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
