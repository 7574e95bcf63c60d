use rand_chacha::ChaCha8Rng;

use crate::instafill::{threshold_mask, Checkpoint, InsertionConfig, WhatMask, WhereProposal, MASK_SIZE};
use crate::nn::{randn, tensor, to_vec};
use crate::semmap::{
    composite_instance, mask_to_bbox, one_hot_chw, resize_nearest, BoundingBox, InstanceMask, SemanticMap,
};
use crate::{Error, Result};

/// Map with one inserted instance, its tight box and the placed mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Insertion {
    pub map: SemanticMap,
    pub bbox: BoundingBox,
    pub instance: InstanceMask,
}

fn check_full(map: &SemanticMap, cfg: &InsertionConfig) -> Result<()> {
    if map.size() != cfg.full_size {
        return Err(Error::Contract(format!(
            "map is {}x{}, insertion expects {}x{}",
            map.width(),
            map.height(),
            cfg.full_size.0,
            cfg.full_size.1
        )));
    }
    map.validate(cfg.num_classes)
}

/// One-hot `(k, h/4, w/4)` input of the placement network.
pub fn where_input(map: &SemanticMap, cfg: &InsertionConfig) -> Result<Vec<f32>> {
    check_full(map, cfg)?;
    let (w, h) = cfg.where_size();
    one_hot_chw(&resize_nearest(map, w, h)?, cfg.num_classes)
}

/// The 128x128 window of `map` centered on `(cx, cy)` (normalized), shifted
/// to stay inside the map. Returns the crop and its top-left corner.
pub fn context_window(map: &SemanticMap, cx: f64, cy: f64) -> Result<(SemanticMap, (usize, usize))> {
    let (w, h) = map.size();
    if w < MASK_SIZE || h < MASK_SIZE {
        return Err(Error::Contract(format!("map {w}x{h} is smaller than the {MASK_SIZE} context window")));
    }
    let origin = |c: f64, len: usize| {
        ((c * len as f64).round() as i64 - MASK_SIZE as i64 / 2).clamp(0, (len - MASK_SIZE) as i64) as usize
    };
    let (x0, y0) = (origin(cx, w), origin(cy, h));
    let mut labels = Vec::with_capacity(MASK_SIZE * MASK_SIZE);
    for y in y0..y0 + MASK_SIZE {
        labels.extend_from_slice(&map.labels()[y * w + x0..y * w + x0 + MASK_SIZE]);
    }
    Ok((SemanticMap::new(MASK_SIZE, MASK_SIZE, labels)?, (x0, y0)))
}

/// Placement for `map_full` and latent `z`.
pub fn propose_location(ckpt: &Checkpoint, map_full: &SemanticMap, z: &[f32]) -> Result<WhereProposal> {
    let cfg = &ckpt.config;
    check_latent(z, cfg)?;
    let (w, h) = cfg.where_size();
    let x = tensor(where_input(map_full, cfg)?, &[1, cfg.num_classes, h, w])?;
    let p = ckpt.where_g.forward(&x, &tensor(z.to_vec(), &[1, cfg.latent_dim])?)?;
    let get = |t: &candle_core::Tensor| -> Result<f64> { Ok(f64::from(to_vec(t)?[0])) };
    Ok(WhereProposal { cx: get(&p.cx)?, cy: get(&p.cy)?, log_scale: get(&p.log_scale)? })
}

/// Raw silhouette in `[0, 1]`, 128x128 row-major.
pub fn generate_raw_shape(ckpt: &Checkpoint, context: &SemanticMap, z: &[f32]) -> Result<Vec<f32>> {
    let cfg = &ckpt.config;
    check_latent(z, cfg)?;
    if context.size() != (MASK_SIZE, MASK_SIZE) {
        return Err(Error::Contract(format!("context must be {MASK_SIZE}x{MASK_SIZE}")));
    }
    let x = tensor(one_hot_chw(context, cfg.num_classes)?, &[1, cfg.num_classes, MASK_SIZE, MASK_SIZE])?;
    to_vec(&ckpt.what_g.forward(&x, &tensor(z.to_vec(), &[1, cfg.latent_dim])?)?)
}

/// Thresholded silhouette; fails with a degenerate-shape error when fewer
/// than `min_area` pixels survive.
pub fn generate_shape(ckpt: &Checkpoint, context: &SemanticMap, z: &[f32]) -> Result<WhatMask> {
    threshold_mask(&generate_raw_shape(ckpt, context, z)?, &ckpt.config)
}

fn check_latent(z: &[f32], cfg: &InsertionConfig) -> Result<()> {
    if z.len() != cfg.latent_dim || z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract(format!("latent must hold {} finite values, got {}", cfg.latent_dim, z.len())));
    }
    Ok(())
}

/// Scales `mask` to `exp(log_scale) * 128` pixels, centers it at
/// `(cx * W, cy * H)`, clips it to the map and composites the person class.
pub fn insert_instance(
    map_full: &SemanticMap,
    proposal: &WhereProposal,
    mask: &WhatMask,
    cfg: &InsertionConfig,
) -> Result<Insertion> {
    check_full(map_full, cfg)?;
    let (w, h) = cfg.full_size;
    let scaled = InstanceMask::new(MASK_SIZE, MASK_SIZE, mask.values().to_vec(), (0, 0), proposal.scale())?;
    let (sw, sh) = scaled.scaled_size();
    let ax = (proposal.cx * w as f64 - sw as f64 / 2.0).round() as i64;
    let ay = (proposal.cy * h as f64 - sh as f64 / 2.0).round() as i64;
    let (x0, y0) = (ax.max(0), ay.max(0));
    let (x1, y1) = ((ax + sw as i64).min(w as i64), (ay + sh as i64).min(h as i64));
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::Placement(format!("footprint {sw}x{sh} at ({ax}, {ay}) lies outside the {w}x{h} map")));
    }
    let (cw, ch) = ((x1 - x0) as usize, (y1 - y0) as usize);
    let mut bits = vec![0u8; cw * ch];
    for (u, v) in scaled.placed_pixels() {
        let (x, y) = (ax + u as i64, ay + v as i64);
        if x >= x0 && x < x1 && y >= y0 && y < y1 {
            bits[(y - y0) as usize * cw + (x - x0) as usize] = 1;
        }
    }
    let instance = InstanceMask::new(cw, ch, bits, (x0 as usize, y0 as usize), 1.0)?;
    let area = instance.set_count();
    if area < cfg.min_area {
        return Err(Error::DegenerateShape { area, min_area: cfg.min_area });
    }
    let map = composite_instance(map_full, &instance, cfg.person_class_id, cfg.num_classes)?;
    let bbox = mask_to_bbox(&instance)?;
    Ok(Insertion { map, bbox, instance })
}

/// Proposal, silhouette and compositing with fresh latents per attempt;
/// degenerate shapes and failed placements are retried up to the budget.
pub fn insert_with_retries(ckpt: &Checkpoint, map_full: &SemanticMap, rng: &mut ChaCha8Rng) -> Result<Insertion> {
    let cfg = &ckpt.config;
    let mut last = None;
    for attempt in 0..cfg.retry_budget {
        let proposal = propose_location(ckpt, map_full, &randn(rng, cfg.latent_dim))?;
        let (context, _) = context_window(map_full, proposal.cx, proposal.cy)?;
        let z = randn(rng, cfg.latent_dim);
        let result = generate_shape(ckpt, &context, &z).and_then(|m| insert_instance(map_full, &proposal, &m, cfg));
        match result {
            Ok(ins) => return Ok(ins),
            Err(e @ (Error::DegenerateShape { .. } | Error::Placement(_))) => {
                log::debug!("insertion attempt {} failed: {e}", attempt + 1);
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("retry budget is positive"))
}
