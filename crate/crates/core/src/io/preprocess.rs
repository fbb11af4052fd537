//! Input preprocessing: bilinear resize, then per-channel standardisation.

use crate::error::{Error, Result};
use crate::kernels;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::manifest::ImageRecord;

/// ImageNet channel means.
pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
/// ImageNet channel standard deviations.
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub target_h: usize,
    pub target_w: usize,
    /// One entry per channel.
    pub mean: Vec<f64>,
    /// One entry per channel, all positive.
    pub std: Vec<f64>,
    /// Pixel values are divided by this before standardisation. Loaders
    /// already map PPM bytes to `[0,1]`, so the default is 1; use 255 for
    /// raw tensors holding byte-range values.
    pub value_scale: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            target_h: 224,
            target_w: 224,
            mean: IMAGENET_MEAN.to_vec(),
            std: IMAGENET_STD.to_vec(),
            value_scale: 1.0,
        }
    }
}

impl PreprocessConfig {
    /// Resize-only configuration: zero mean, unit std.
    pub fn identity(channels: usize, target_h: usize, target_w: usize) -> Self {
        PreprocessConfig {
            target_h,
            target_w,
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
            value_scale: 1.0,
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.mean.len() != channels || self.std.len() != channels {
            return Err(Error::InvalidConfig(format!(
                "mean/std need {channels} entries, got {} and {}",
                self.mean.len(),
                self.std.len()
            )));
        }
        if self.std.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::InvalidConfig("std entries must be positive".into()));
        }
        if self.value_scale.is_nan() || self.value_scale <= 0.0 {
            return Err(Error::InvalidConfig("value_scale must be positive".into()));
        }
        Ok(())
    }

    pub fn apply<S: Scalar>(&self, pixels: &Tensor<S>) -> Result<Tensor<S>> {
        let (c, _, _) = pixels.chw()?;
        self.validate(c)?;
        let mut out = kernels::bilinear_resize(pixels, self.target_h, self.target_w)?;
        let plane = self.target_h * self.target_w;
        for (ch, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let (m, s) = (self.mean[ch], self.std[ch]);
            for v in chunk {
                *v = S::from_acc((v.acc() / self.value_scale - m) / s);
            }
        }
        Ok(out)
    }

    /// Undoes the standardisation step (not the resize).
    pub fn invert<S: Scalar>(&self, input: &Tensor<S>) -> Result<Tensor<S>> {
        let (c, h, w) = input.chw()?;
        self.validate(c)?;
        let mut out = input.clone();
        for (ch, chunk) in out.data_mut().chunks_mut(h * w).enumerate() {
            let (m, s) = (self.mean[ch], self.std[ch]);
            for v in chunk {
                *v = S::from_acc((v.acc() * s + m) * self.value_scale);
            }
        }
        Ok(out)
    }
}

pub fn preprocess(image: &ImageRecord, cfg: &PreprocessConfig) -> Result<Tensor<f32>> {
    cfg.apply(&image.pixels)
}
