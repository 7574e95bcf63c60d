//! Layered street scenes used as CPU-scale training data.
//!
//! A scene is a sky band over a road band, with building blocks rising from
//! the horizon and zero or more person rectangles standing fully on the
//! road. The background (before persons are drawn) is kept alongside the
//! final map so the insertion stage can harvest real placements.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::semmap::{BoundingBox, LabelPalette, SceneRoles, SemanticMap};
use crate::{seeds, Error, Result};

pub const MIN_SCENE_SIDE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToySceneConfig {
    pub roles: Option<SceneRoles>,
    pub min_persons: usize,
    pub max_persons: usize,
}

impl Default for ToySceneConfig {
    fn default() -> Self {
        Self { roles: None, min_persons: 0, max_persons: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyScene {
    pub background: SemanticMap,
    pub map: SemanticMap,
    pub persons: Vec<BoundingBox>,
}

pub fn generate_toy_scene(seed: u64, w: usize, h: usize, palette: &LabelPalette) -> Result<SemanticMap> {
    Ok(generate_toy_scene_with(seed, w, h, palette, &ToySceneConfig::default())?.map)
}

pub fn generate_toy_scene_with(
    seed: u64,
    w: usize,
    h: usize,
    palette: &LabelPalette,
    cfg: &ToySceneConfig,
) -> Result<ToyScene> {
    if w < MIN_SCENE_SIDE || h < MIN_SCENE_SIDE {
        return Err(Error::SceneTooSmall { w, h });
    }
    if cfg.min_persons > cfg.max_persons {
        return Err(Error::Config(format!("min_persons {} exceeds max_persons {}", cfg.min_persons, cfg.max_persons)));
    }
    let roles = match cfg.roles {
        Some(r) => r,
        None => SceneRoles::from_palette(palette)?,
    };
    roles.validate(palette)?;

    let mut rng = seeds::rng(seed);
    let road_top = ((h as f64 * rng.gen_range(0.55..0.70)) as usize).clamp(3, h - 2);
    let mut map = SemanticMap::filled(w, h, roles.sky as u8)?;
    map.fill_rect(0, road_top, w, h, roles.road as u8);

    let (min_bw, max_bw) = ((w / 10).max(1), (w / 4).max(2));
    let mut x = 0;
    while x < w {
        let bw = rng.gen_range(min_bw..=max_bw);
        if rng.gen_bool(0.75) {
            let top = ((h as f64 * rng.gen_range(0.12..0.45)) as usize).min(road_top - 1);
            map.fill_rect(x, top, x + bw, road_top, roles.building as u8);
        }
        x += bw;
    }
    let background = map.clone();

    let road_depth = h - road_top;
    let count = rng.gen_range(cfg.min_persons..=cfg.max_persons);
    let mut persons = Vec::with_capacity(count);
    for _ in 0..count {
        let ph = ((h as f64 * rng.gen_range(0.12..0.30)).round() as usize).clamp(2, road_depth);
        let pw = ((ph as f64 * rng.gen_range(0.30..0.45)).round() as usize).clamp(1, w);
        let px = rng.gen_range(0..=w - pw);
        let py = rng.gen_range(road_top..=h - ph);
        map.fill_rect(px, py, px + pw, py + ph, roles.person as u8);
        persons.push(BoundingBox::new(px as u32, py as u32, pw as u32, ph as u32)?);
    }
    Ok(ToyScene { background, map, persons })
}
