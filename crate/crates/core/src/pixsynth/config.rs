use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Translator architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    /// `(width, height)` of maps and images.
    pub operating_size: (usize, usize),
    pub num_classes: usize,
    /// Channels of the last generator block; earlier blocks double up to
    /// eight times this.
    pub base_channels: usize,
    pub num_upsample_blocks: usize,
    /// Hidden width of each normalization's modulation head.
    pub norm_hidden: usize,
    /// Width of the first discriminator layer.
    pub disc_channels: usize,
    /// Style latent size; 0 disables the latent input.
    pub latent_dim: usize,
    pub lambda_fm: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            operating_size: (512, 256),
            num_classes: 34,
            base_channels: 16,
            num_upsample_blocks: 5,
            norm_hidden: 32,
            disc_channels: 16,
            latent_dim: 0,
            lambda_fm: 10.0,
        }
    }
}

impl SynthConfig {
    /// 128x64 over the toy palette with narrow layers.
    pub fn toy() -> Self {
        Self {
            operating_size: (128, 64),
            num_classes: 8,
            base_channels: 8,
            num_upsample_blocks: 4,
            norm_hidden: 16,
            disc_channels: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (w, h) = self.operating_size;
        if !w.is_power_of_two() || !h.is_power_of_two() {
            return bad(format!("operating size {w}x{h} must be powers of two"));
        }
        if self.num_upsample_blocks == 0 || (w.min(h) >> self.num_upsample_blocks) == 0 {
            return bad(format!("{} upsampling blocks do not fit {w}x{h}", self.num_upsample_blocks));
        }
        if w.min(h) < 8 {
            return bad(format!("operating size {w}x{h} is too small for the discriminator"));
        }
        if self.num_classes == 0 || self.num_classes > 256 {
            return bad(format!("num_classes {} must lie in 1..=256", self.num_classes));
        }
        if self.base_channels == 0 || self.norm_hidden == 0 || self.disc_channels == 0 {
            return bad("channel widths must be positive".into());
        }
        if !(self.lambda_fm.is_finite() && self.lambda_fm >= 0.0) {
            return bad(format!("lambda_fm {} must be non-negative", self.lambda_fm));
        }
        Ok(())
    }

    /// Spatial size `(w, h)` of the generator's seed grid.
    pub fn seed_size(&self) -> (usize, usize) {
        (self.operating_size.0 >> self.num_upsample_blocks, self.operating_size.1 >> self.num_upsample_blocks)
    }
}
