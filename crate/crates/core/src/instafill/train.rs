use std::path::Path;

use candle_core::Tensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::instafill::{
    context_window, render_footprint, where_input, InsertionConfig, PatchCritic, Placement, WhatGenerator, WhatMask,
    WhereGenerator, WhereProposal, MASK_SIZE,
};
use crate::nn::{archive, randn, tensor, Adam, ParamStore, TrainConfig};
use crate::semgan::discriminator_bce_loss;
use crate::semmap::{one_hot_chw, ToyScene};
use crate::{seeds, Error, Result};

pub const CHECKPOINT_MAGIC: &str = "INSTA1";
pub const METRICS_HEADER: &str = "step,epoch,where_d,where_g,what_d,what_g";

const EPS: f64 = 1e-7;

/// Placement and silhouette networks with their critics and optimizers.
pub struct Checkpoint {
    pub config: InsertionConfig,
    pub train: TrainConfig,
    pub epoch: usize,
    pub where_g: WhereGenerator,
    pub where_d: PatchCritic,
    pub what_g: WhatGenerator,
    pub what_d: PatchCritic,
    opts: [Adam; 4],
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: InsertionConfig,
    train: TrainConfig,
    epoch: usize,
    steps: [u64; 4],
}

const NAMES: [&str; 4] = ["where_g", "where_d", "what_g", "what_d"];

impl Checkpoint {
    pub fn new(config: InsertionConfig, train: TrainConfig) -> Result<Self> {
        config.validate()?;
        train.validate()?;
        let mut rng = seeds::derived_rng(train.seed, "instafill.init", 0);
        let where_g = WhereGenerator::new(&config, &mut rng)?;
        let where_d = PatchCritic::new(config.num_classes + 1, config.base_channels, 4, &mut rng)?;
        let what_g = WhatGenerator::new(&config, &mut rng)?;
        let what_d = PatchCritic::new(config.num_classes + 1, config.base_channels, 4, &mut rng)?;
        let a = train.adam();
        let opts = [
            Adam::new(&where_g.store, a)?,
            Adam::new(&where_d.store, a)?,
            Adam::new(&what_g.store, a)?,
            Adam::new(&what_d.store, a)?,
        ];
        Ok(Self { config, train, epoch: 0, where_g, where_d, what_g, what_d, opts })
    }

    fn stores(&self) -> [&ParamStore; 4] {
        [&self.where_g.store, &self.where_d.store, &self.what_g.store, &self.what_d.store]
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            config: self.config.clone(),
            train: self.train.clone(),
            epoch: self.epoch,
            steps: [0, 1, 2, 3].map(|i| self.opts[i].steps()),
        };
        let mut tensors = Vec::new();
        for ((name, store), opt) in NAMES.iter().zip(self.stores()).zip(&self.opts) {
            tensors.extend(store.named_tensors().into_iter().map(|(n, t)| (format!("{name}.{n}"), t)));
            tensors.extend(opt.named_state(&format!("adam_{name}")));
        }
        archive::to_bytes(CHECKPOINT_MAGIC, &serde_json::to_value(meta)?, &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let archive = archive::from_bytes(CHECKPOINT_MAGIC, bytes)?;
        let meta: Meta = serde_json::from_value(archive.meta)?;
        let mut ckpt = Self::new(meta.config, meta.train)?;
        ckpt.epoch = meta.epoch;
        for (name, store) in NAMES.iter().zip(ckpt.stores()) {
            let prefix = format!("{name}.");
            let own = archive
                .tensors
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(&prefix).map(|r| (r.to_string(), t.clone())))
                .collect();
            store.load(&own)?;
        }
        for (i, name) in NAMES.iter().enumerate() {
            ckpt.opts[i].load_state(&format!("adam_{name}"), meta.steps[i], &archive.tensors)?;
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::path(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::path(path, e))?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsertionStep {
    pub step: usize,
    pub epoch: usize,
    pub where_d: f64,
    pub where_g: f64,
    pub what_d: f64,
    pub what_g: f64,
}

pub fn metrics_csv(log: &[InsertionStep]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for s in log {
        out.push_str(&format!("{},{},{},{},{},{}\n", s.step, s.epoch, s.where_d, s.where_g, s.what_d, s.what_g));
    }
    out
}

/// The silhouette a ground-truth box implies: full mask height, width in
/// proportion, centered, at the scale of the box's longer side.
pub fn real_shape(w: u32, h: u32) -> WhatMask {
    let side = f64::from(w.max(h));
    let unit = MASK_SIZE as f64 / side;
    WhatMask::centered_rect((f64::from(w) * unit).round() as usize, (f64::from(h) * unit).round() as usize)
}

/// One person harvested from a toy scene, encoded once.
struct Example {
    where_map: Tensor,
    real: WhereProposal,
    context: Tensor,
    real_mask: Tensor,
}

fn harvest(scenes: &[ToyScene], cfg: &InsertionConfig) -> Result<Vec<Vec<Example>>> {
    if scenes.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    let (ww, wh) = cfg.where_size();
    let k = cfg.num_classes;
    scenes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.persons.is_empty() {
                return Err(Error::NoInstances(format!("scene {i} has no person instance")));
            }
            let where_map = tensor(where_input(&s.background, cfg)?, &[1, k, wh, ww])?;
            s.persons
                .iter()
                .map(|b| {
                    if !b.fits_within(cfg.full_size.0, cfg.full_size.1) {
                        return Err(Error::Contract(format!("person box {b:?} in scene {i} leaves the map")));
                    }
                    let real = WhereProposal::from_box(b, cfg.full_size);
                    let (ctx, _) = context_window(&s.background, real.cx, real.cy)?;
                    let context = tensor(one_hot_chw(&ctx, k)?, &[1, k, MASK_SIZE, MASK_SIZE])?;
                    let mask: Vec<f32> = real_shape(b.w, b.h).values().iter().map(|&v| f32::from(v)).collect();
                    let real_mask = tensor(mask, &[1, 1, MASK_SIZE, MASK_SIZE])?;
                    Ok(Example { where_map: where_map.clone(), real, context, real_mask })
                })
                .collect()
        })
        .collect()
}

fn generator_loss(fake_scores: &Tensor) -> Result<Tensor> {
    Ok(fake_scores.clamp(EPS, 1.0 - EPS)?.log()?.mean_all()?.neg()?)
}

fn value(t: &Tensor, step: usize, epoch: usize, what: &str) -> Result<f64> {
    let v = f64::from(t.to_scalar::<f32>()?);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { step, epoch, detail: format!("{what} = {v}") })
    }
}

fn placement_tensors(p: &WhereProposal) -> Result<Placement> {
    Ok(Placement {
        cx: tensor(vec![p.cx as f32], &[1])?,
        cy: tensor(vec![p.cy as f32], &[1])?,
        log_scale: tensor(vec![p.log_scale as f32], &[1])?,
    })
}

/// Adversarial training of both modules on toy scenes, one example per
/// step.
///
/// For every scene one of its persons is drawn per epoch. The placement
/// critic sees the person-free background at quarter resolution with the
/// footprint rendered as an extra channel; the silhouette critic sees the
/// 128x128 context window with the mask as an extra channel. Critics use
/// binary cross-entropy, generators the non-saturating `-ln D(fake)`.
pub fn train_insertion(
    scenes: &[ToyScene],
    cfg: &InsertionConfig,
    tc: &TrainConfig,
) -> Result<(Checkpoint, Vec<InsertionStep>)> {
    let mut ckpt = Checkpoint::new(cfg.clone(), tc.clone())?;
    let log = train_insertion_more(&mut ckpt, scenes, tc.epochs)?;
    Ok((ckpt, log))
}

pub fn train_insertion_more(ckpt: &mut Checkpoint, scenes: &[ToyScene], epochs: usize) -> Result<Vec<InsertionStep>> {
    let cfg = ckpt.config.clone();
    let examples = harvest(scenes, &cfg)?;
    let seed = ckpt.train.seed;
    let (ww, wh) = cfg.where_size();
    let d = cfg.latent_dim;
    let mut log = Vec::new();
    let mut step = ckpt.opts[0].steps() as usize;
    for _ in 0..epochs {
        let epoch = ckpt.epoch;
        let mut rng = seeds::derived_rng(seed, "instafill.epoch", epoch as u64);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        for &i in &order {
            let ex = &examples[i][rng.gen_range(0..examples[i].len())];

            let fake = ckpt.where_g.forward(&ex.where_map, &tensor(randn(&mut rng, d), &[1, d])?)?;
            let real_in = Tensor::cat(
                &[&ex.where_map, &render_footprint(&placement_tensors(&ex.real)?, (ww, wh), cfg.full_size.0)?],
                1,
            )?;
            let fake_in = Tensor::cat(&[&ex.where_map, &render_footprint(&fake, (ww, wh), cfg.full_size.0)?], 1)?;
            let wd =
                discriminator_bce_loss(&ckpt.where_d.forward(&real_in)?, &ckpt.where_d.forward(&fake_in.detach())?)?;
            let where_d = value(&wd, step, epoch, "where_d")?;
            ckpt.opts[1].step(&wd.backward()?)?;
            let wg = generator_loss(&ckpt.where_d.forward(&fake_in)?)?;
            let where_g = value(&wg, step, epoch, "where_g")?;
            ckpt.opts[0].step(&wg.backward()?)?;

            let fake_mask = ckpt.what_g.forward(&ex.context, &tensor(randn(&mut rng, d), &[1, d])?)?;
            let real_in = Tensor::cat(&[&ex.context, &ex.real_mask], 1)?;
            let fake_in = Tensor::cat(&[&ex.context, &fake_mask], 1)?;
            let md = discriminator_bce_loss(&ckpt.what_d.forward(&real_in)?, &ckpt.what_d.forward(&fake_in.detach())?)?;
            let what_d = value(&md, step, epoch, "what_d")?;
            ckpt.opts[3].step(&md.backward()?)?;
            let mg = generator_loss(&ckpt.what_d.forward(&fake_in)?)?;
            let what_g = value(&mg, step, epoch, "what_g")?;
            ckpt.opts[2].step(&mg.backward()?)?;

            log::debug!("instafill step {step}: where {where_d:.4}/{where_g:.4} what {what_d:.4}/{what_g:.4}");
            log.push(InsertionStep { step, epoch, where_d, where_g, what_d, what_g });
            step += 1;
        }
        ckpt.epoch += 1;
        log::info!("instafill epoch {} done", ckpt.epoch);
    }
    Ok(log)
}
