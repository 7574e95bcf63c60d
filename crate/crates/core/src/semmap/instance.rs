use serde::{Deserialize, Serialize};

use crate::semmap::SemanticMap;
use crate::{Error, Result};

/// Axis-aligned box in pixels; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BoundingBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::Contract(format!("box ({x},{y},{w},{h}) has zero extent")));
        }
        Ok(Self { x, y, w, h })
    }

    /// Exclusive right edge.
    pub fn x2(&self) -> u64 {
        u64::from(self.x) + u64::from(self.w)
    }

    /// Exclusive bottom edge.
    pub fn y2(&self) -> u64 {
        u64::from(self.y) + u64::from(self.h)
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn fits_within(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x2() <= width as u64 && self.y2() <= height as u64
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (x as u64) >= u64::from(self.x)
            && (x as u64) < self.x2()
            && (y as u64) >= u64::from(self.y)
            && (y as u64) < self.y2()
    }

    /// Maps the box between resolutions: origins are floored, far edges
    /// ceiled, so the result covers every pixel the source box touches and
    /// never collapses to zero size.
    pub fn rescale(&self, from: (usize, usize), to: (usize, usize)) -> Self {
        let (fw, fh) = (from.0 as u64, from.1 as u64);
        let (tw, th) = (to.0 as u64, to.1 as u64);
        let x0 = u64::from(self.x) * tw / fw;
        let y0 = u64::from(self.y) * th / fh;
        let x1 = (self.x2() * tw).div_ceil(fw).max(x0 + 1);
        let y1 = (self.y2() * th).div_ceil(fh).max(y0 + 1);
        Self { x: x0 as u32, y: y0 as u32, w: (x1 - x0) as u32, h: (y1 - y0) as u32 }
    }
}

/// Binary silhouette plus its placement in a target map.
///
/// The mask is scaled by nearest neighbor to
/// `max(1, round(mw * scale)) x max(1, round(mh * scale))` pixels and its
/// top-left corner is put at `anchor`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    width: usize,
    height: usize,
    mask: Vec<u8>,
    pub anchor: (usize, usize),
    pub scale: f64,
}

impl InstanceMask {
    pub fn new(width: usize, height: usize, mask: Vec<u8>, anchor: (usize, usize), scale: f64) -> Result<Self> {
        if width == 0 || height == 0 || mask.len() != width * height {
            return Err(Error::Contract(format!("mask of {} values cannot be {width}x{height}", mask.len())));
        }
        if let Some(v) = mask.iter().find(|&&v| v > 1) {
            return Err(Error::Contract(format!("mask value {v} is not binary")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Contract(format!("mask scale {scale} must be positive")));
        }
        Ok(Self { width, height, mask, anchor, scale })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[u8] {
        &self.mask
    }

    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x] == 1
    }

    pub fn set_count(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 1).count()
    }

    /// Size of the scaled footprint.
    pub fn scaled_size(&self) -> (usize, usize) {
        let side = |n: usize| ((n as f64 * self.scale).round() as usize).max(1);
        (side(self.width), side(self.height))
    }

    /// Target-map coordinates of every set pixel after scaling and placement,
    /// row-major.
    pub fn placed_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (sw, sh) = self.scaled_size();
        let (ax, ay) = self.anchor;
        (0..sh).flat_map(move |v| {
            let row = (v * self.height / sh) * self.width;
            (0..sw).filter_map(move |u| (self.mask[row + u * self.width / sw] == 1).then_some((ax + u, ay + v)))
        })
    }
}

/// Writes `class_id` under every set pixel of the placed mask.
pub fn composite_instance(map: &SemanticMap, inst: &InstanceMask, class_id: u32, k: usize) -> Result<SemanticMap> {
    if class_id as usize >= k || class_id > 255 {
        return Err(Error::InvalidClass { class_id, k });
    }
    let (sw, sh) = inst.scaled_size();
    let (ax, ay) = inst.anchor;
    if ax + sw > map.width() || ay + sh > map.height() {
        return Err(Error::OutOfBounds(format!(
            "footprint {sw}x{sh} at ({ax}, {ay}) exceeds {}x{} map",
            map.width(),
            map.height()
        )));
    }
    let mut out = map.clone();
    for (x, y) in inst.placed_pixels() {
        out.set(x, y, class_id as u8);
    }
    Ok(out)
}

/// Tightest box around the placed set pixels.
pub fn mask_to_bbox(inst: &InstanceMask) -> Result<BoundingBox> {
    let mut pixels = inst.placed_pixels();
    let (x, y) = pixels.next().ok_or(Error::EmptyMask)?;
    let (mut x0, mut y0, mut x1, mut y1) = (x, y, x, y);
    for (x, y) in pixels {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    BoundingBox::new(x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32)
}
