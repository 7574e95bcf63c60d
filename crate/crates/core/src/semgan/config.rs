use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Architecture of the stage-1 map generator and its discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemGanConfig {
    /// Side of the square output map.
    pub resolution: usize,
    pub num_classes: usize,
    pub latent_dim: usize,
    pub base_channels: usize,
    pub dropout_rate: f64,
    /// Discriminator activation used for feature matching, `conv<N>`.
    pub feature_tap: String,
}

impl Default for SemGanConfig {
    fn default() -> Self {
        Self::full_scale(34)
    }
}

impl SemGanConfig {
    /// 256x256 maps over `k` classes with 64 base channels.
    pub fn full_scale(num_classes: usize) -> Self {
        Self {
            resolution: 256,
            num_classes,
            latent_dim: 128,
            base_channels: 64,
            dropout_rate: 0.3,
            feature_tap: "conv6".into(),
        }
    }

    /// 64x64 maps with 16 base channels.
    pub fn toy(num_classes: usize) -> Self {
        Self { resolution: 64, base_channels: 16, ..Self::full_scale(num_classes) }
    }

    /// Upsampling blocks from the 4x4 seed grid to full resolution.
    pub fn num_blocks(&self) -> usize {
        self.resolution.trailing_zeros() as usize - 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.resolution.is_power_of_two() || self.resolution < 16 {
            return bad(format!("resolution {} must be a power of two >= 16", self.resolution));
        }
        if self.base_channels < 8 {
            return bad(format!("base_channels {} must be >= 8", self.base_channels));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} must lie in [0, 1)", self.dropout_rate));
        }
        if self.num_classes == 0 || self.num_classes > 256 {
            return bad(format!("num_classes {} must lie in 1..=256", self.num_classes));
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be positive".into());
        }
        self.tap_index()?;
        Ok(())
    }

    /// 1-based convolution index named by `feature_tap`.
    pub fn tap_index(&self) -> Result<usize> {
        self.feature_tap
            .strip_prefix("conv")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Config(format!("feature_tap {:?} is not of the form conv<N>", self.feature_tap)))
    }

    pub(crate) fn cap(&self) -> usize {
        self.base_channels * 8
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_follow_resolution() {
        assert_eq!(SemGanConfig::full_scale(34).num_blocks(), 6);
        assert_eq!(SemGanConfig::toy(8).num_blocks(), 4);
    }

    #[test]
    fn rejects_bad_configs() {
        let ok = SemGanConfig::toy(8);
        ok.validate().unwrap();
        for bad in [
            SemGanConfig { resolution: 48, ..ok.clone() },
            SemGanConfig { resolution: 8, ..ok.clone() },
            SemGanConfig { base_channels: 4, ..ok.clone() },
            SemGanConfig { dropout_rate: 1.0, ..ok.clone() },
            SemGanConfig { feature_tap: "fc6".into(), ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }
}
