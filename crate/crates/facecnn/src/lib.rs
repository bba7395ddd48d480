//! From-scratch convolutional neural network trainer: a seven-layer
//! network (two convolution/subsampling stages, a hidden layer, and an
//! output layer, all through tanh) with hand-derived backpropagation,
//! batch gradient descent, a two-phase stop protocol, and a data-parallel
//! epoch driver whose results are bit-identical to the serial loop for any
//! worker count.
//!
//! Everything is plain `f64` on the CPU; gradient correctness is pinned by
//! finite-difference checks rather than an autodiff framework.

pub mod backprop;
pub mod dataio;
pub mod error;
pub mod layers;
pub mod network;
pub mod parallel;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
