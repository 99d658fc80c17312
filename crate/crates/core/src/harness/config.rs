//! JSON configuration for the synthetic-scene harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of one synthetic scene plus the knobs of the downstream
/// pipeline stages. Unknown keys in a config file are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnessConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub num_objects: usize,
    /// (min, max) object side length in pixels.
    pub object_size: (f64, f64),
    /// Translation applied to the thermal stream, pixels.
    pub true_shift: (f64, f64),
    pub noise_sigma: f64,
    pub channels: usize,
    /// Positive-assignment threshold.
    pub tau: f64,
    /// GeoShape aspect weight.
    pub gamma: f64,
    /// GeoShape IoU weight.
    pub beta: f64,
    /// KL loss scaling factor.
    pub lambda: f64,
    /// Offset bound for predicted displacement fields, pixels.
    pub max_disp: f64,
    /// Image-to-feature downsampling factor for region cropping.
    pub stride: usize,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 64,
            height: 64,
            num_objects: 3,
            object_size: (4.0, 8.0),
            true_shift: (0.0, 0.0),
            noise_sigma: 0.0,
            channels: 4,
            tau: 0.5,
            gamma: 2.0,
            beta: 1.0,
            lambda: 0.1,
            max_disp: 1.0,
            stride: 1,
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width % 2 != 0 || self.height % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "width and height must be even and positive, got {}x{}",
                self.width, self.height
            )));
        }
        if self.num_objects == 0 {
            return Err(Error::InvalidConfig("num_objects must be positive".into()));
        }
        if self.channels == 0 {
            return Err(Error::InvalidConfig("channels must be positive".into()));
        }
        let (lo, hi) = self.object_size;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidConfig(format!(
                "object_size must satisfy 0 < min <= max, got ({}, {})",
                lo, hi
            )));
        }
        if hi >= self.width.min(self.height) as f64 {
            return Err(Error::InvalidConfig(
                "object sizes must fit inside the image".into(),
            ));
        }
        let (sx, sy) = self.true_shift;
        if !(sx.is_finite() && sy.is_finite()) || sx.abs() > 8.0 || sy.abs() > 8.0 {
            return Err(Error::InvalidConfig(
                "true_shift components must lie in [-8, 8]".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig("noise_sigma must be >= 0".into()));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidConfig("tau must lie in (0, 1]".into()));
        }
        if self.gamma < 0.0 || self.beta < 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidConfig(
                "gamma, beta and lambda must be non-negative".into(),
            ));
        }
        if !(self.max_disp > 0.0) {
            return Err(Error::InvalidConfig("max_disp must be positive".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidConfig("stride must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
