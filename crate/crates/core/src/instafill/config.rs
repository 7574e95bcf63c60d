use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Side of the square silhouette produced by the shape generator.
pub const MASK_SIZE: usize = 128;

/// Placement and silhouette settings for person insertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InsertionConfig {
    /// `(width, height)` of the map instances are inserted into.
    pub full_size: (usize, usize),
    pub person_class_id: u32,
    pub num_classes: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub min_area: usize,
    pub threshold: f64,
    /// Latent resamples allowed per instance on degenerate shapes.
    pub retry_budget: usize,
    pub instances_per_map: usize,
    pub latent_dim: usize,
    pub base_channels: usize,
}

impl Default for InsertionConfig {
    fn default() -> Self {
        Self {
            full_size: (1024, 512),
            person_class_id: 24,
            num_classes: 34,
            scale_min: 0.25,
            scale_max: 2.0,
            min_area: 32,
            threshold: 0.5,
            retry_budget: 8,
            instances_per_map: 1,
            latent_dim: 32,
            base_channels: 16,
        }
    }
}

impl InsertionConfig {
    /// Toy palette (person = 6, eight classes) with narrow networks.
    pub fn toy() -> Self {
        Self { person_class_id: 6, num_classes: 8, base_channels: 8, ..Self::default() }
    }

    /// Resolution of the placement network's input: a quarter of the full
    /// map on each axis.
    pub fn where_size(&self) -> (usize, usize) {
        (self.full_size.0 / 4, self.full_size.1 / 4)
    }

    pub fn mask_size(&self) -> (usize, usize) {
        (MASK_SIZE, MASK_SIZE)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (w, h) = self.full_size;
        if w % 64 != 0 || h % 64 != 0 || w < MASK_SIZE || h < MASK_SIZE {
            return bad(format!("full_size {w}x{h} must be multiples of 64 and at least {MASK_SIZE}"));
        }
        if self.person_class_id as usize >= self.num_classes || self.num_classes > 256 {
            return bad(format!("person class {} outside {} classes", self.person_class_id, self.num_classes));
        }
        if !(self.scale_min > 0.0 && self.scale_min < self.scale_max && self.scale_max.is_finite()) {
            return bad(format!("scale bounds [{}, {}] are invalid", self.scale_min, self.scale_max));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if self.min_area == 0 || self.retry_budget == 0 || self.latent_dim == 0 || self.base_channels < 4 {
            return bad("min_area, retry_budget and latent_dim must be positive, base_channels >= 4".into());
        }
        Ok(())
    }
}

/// Placement: center in `[0, 1]^2` of the map and log of the footprint
/// scale relative to a 128-pixel silhouette.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhereProposal {
    pub cx: f64,
    pub cy: f64,
    pub log_scale: f64,
}

impl WhereProposal {
    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// Proposal covering a full-resolution box with a square footprint of
    /// the box's longer side.
    pub fn from_box(b: &crate::semmap::BoundingBox, full_size: (usize, usize)) -> Self {
        let cx = (f64::from(b.x) + f64::from(b.w) / 2.0) / full_size.0 as f64;
        let cy = (f64::from(b.y) + f64::from(b.h) / 2.0) / full_size.1 as f64;
        let side = f64::from(b.w.max(b.h));
        Self { cx, cy, log_scale: (side / MASK_SIZE as f64).ln() }
    }
}

/// Binary 128x128 silhouette.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhatMask {
    mask: Vec<u8>,
}

impl WhatMask {
    pub fn new(mask: Vec<u8>) -> Result<Self> {
        if mask.len() != MASK_SIZE * MASK_SIZE || mask.iter().any(|&v| v > 1) {
            return Err(Error::Contract(format!("silhouette must be {MASK_SIZE}x{MASK_SIZE} binary")));
        }
        Ok(Self { mask })
    }

    pub fn size(&self) -> (usize, usize) {
        (MASK_SIZE, MASK_SIZE)
    }

    pub fn values(&self) -> &[u8] {
        &self.mask
    }

    pub fn area(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 1).count()
    }

    /// Filled rectangle of `w x h` centered in the grid.
    pub fn centered_rect(w: usize, h: usize) -> Self {
        let (w, h) = (w.clamp(1, MASK_SIZE), h.clamp(1, MASK_SIZE));
        let (x0, y0) = ((MASK_SIZE - w) / 2, (MASK_SIZE - h) / 2);
        let mut mask = vec![0; MASK_SIZE * MASK_SIZE];
        for y in y0..y0 + h {
            mask[y * MASK_SIZE + x0..y * MASK_SIZE + x0 + w].fill(1);
        }
        Self { mask }
    }
}

/// Binarizes a raw `[0, 1]` grid at `cfg.threshold`.
pub fn threshold_mask(raw: &[f32], cfg: &InsertionConfig) -> Result<WhatMask> {
    if raw.len() != MASK_SIZE * MASK_SIZE {
        return Err(Error::Contract(format!("raw silhouette has {} values", raw.len())));
    }
    let mask: Vec<u8> = raw.iter().map(|&v| u8::from(f64::from(v) >= cfg.threshold)).collect();
    let m = WhatMask { mask };
    let area = m.area();
    if area < cfg.min_area {
        return Err(Error::DegenerateShape { area, min_area: cfg.min_area });
    }
    Ok(m)
}
