//! Top-down attention through multiplicative feature gating.
//!
//! A frozen convolutional digit classifier (the function network) has its
//! second convolutional feature maps multiplied by gates in `(0, 1)` that a
//! trainable context network produces from a top-down cue. Training the
//! context network backpropagates the classification loss through the frozen
//! classifier.

pub mod dataset;
pub mod digest;
pub mod error;
pub mod gradcheck;
pub mod networks;
pub mod tensor;
pub mod training;
pub mod visualization;

pub use error::{Error, Result};
