//! Joint human orientation and activity recognition from WiFi CSI amplitudes.
//!
//! The pipeline sums each CSI sample over subcarriers, convolves the result
//! with a fixed bank of dilated zero-sum kernels, and summarizes each
//! convolution by the proportion of positive values against fitted biases.
//! One-vs-rest ridge classifiers on those features predict activity and
//! orientation for a single access point, for the concatenated features of
//! several access points, or per access point followed by a majority vote.

pub mod dataset;
pub mod error;
pub mod features;
pub mod fusion;
pub mod kernel_bank;
pub mod metrics;
pub mod ridge;
pub mod seed;

pub use error::{Error, Result};
