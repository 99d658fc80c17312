//! Numeric core of a wavelet-fusion detection stack for misaligned
//! visible/thermal imagery: Haar DWT fusion, offset-based feature
//! alignment, scale refinement, GeoShape box similarity with label
//! assignment, an object-centered KL consistency loss, and a synthetic
//! harness tying the pieces together.

pub mod align;
pub mod assign;
pub mod error;
pub mod harness;
pub mod loss;
pub mod tensor;
pub mod wavelet;

pub use error::{Error, Result};
