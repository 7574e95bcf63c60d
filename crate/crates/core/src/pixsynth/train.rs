use std::path::Path;

use candle_core::Tensor;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::{archive, randn, tensor, Adam, TrainConfig};
use crate::pixsynth::{
    discriminator_hinge_loss, feature_matching_l1, generator_hinge_loss, MultiScaleDiscriminator, SynthConfig,
    SynthGenerator,
};
use crate::semmap::{io::encode_rgb_png, one_hot_chw, LabelPalette, SemanticMap};
use crate::{seeds, Error, Result};

pub const CHECKPOINT_MAGIC: &str = "PXSYN1";
pub const METRICS_HEADER: &str = "step,epoch,d_loss,g_loss,fm_loss";

/// RGB image with values in [-1, 1], stored `(h, w, 3)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::MalformedTensor(format!(
                "{} values cannot form a {width}x{height}x3 image",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(Error::MalformedTensor("image values must be finite and within [-1, 1]".into()));
        }
        Ok(Self { width, height, data })
    }

    /// `(h, w, 3)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, 3)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    fn from_chw(width: usize, height: usize, chw: &[f32]) -> Result<Self> {
        let plane = width * height;
        let data = (0..plane).flat_map(|i| (0..3).map(move |c| chw[c * plane + i])).collect();
        Self::new(width, height, data)
    }

    fn to_chw(&self) -> Vec<f32> {
        (0..3).flat_map(|c| self.data.iter().skip(c).step_by(3).copied()).collect()
    }

    /// 8-bit RGB via `round((v + 1) / 2 * 255)`.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| ((f64::from(v) + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        encode_rgb_png(self.width, self.height, &self.to_rgb8())
    }

    pub fn mean_abs_error(&self, other: &Self) -> f64 {
        let sum: f64 = self.data.iter().zip(&other.data).map(|(a, b)| f64::from((a - b).abs())).sum();
        sum / self.data.len().max(1) as f64
    }
}

/// Palette color of every pixel mapped to [-1, 1], plus seeded Gaussian
/// noise of standard deviation `noise`, clamped to the range.
pub fn toy_target(map: &SemanticMap, palette: &LabelPalette, seed: u64, noise: f64) -> Result<ImageTensor> {
    map.validate(palette.num_classes())?;
    let mut rng = seeds::rng(seed);
    let jitter = randn(&mut rng, map.labels().len() * 3);
    let data = map
        .labels()
        .iter()
        .flat_map(|&l| palette.color(u32::from(l)).expect("label validated"))
        .zip(jitter)
        .map(|(c, j)| ((f64::from(c) / 127.5 - 1.0) + noise * f64::from(j)).clamp(-1.0, 1.0) as f32)
        .collect();
    ImageTensor::new(map.width(), map.height(), data)
}

/// Generator, two-scale discriminator and optimizers.
pub struct Checkpoint {
    pub config: SynthConfig,
    pub train: TrainConfig,
    pub epoch: usize,
    pub generator: SynthGenerator,
    pub discriminator: MultiScaleDiscriminator,
    g_opt: Adam,
    d_opt: Adam,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: SynthConfig,
    train: TrainConfig,
    epoch: usize,
    g_steps: u64,
    d_steps: u64,
}

impl Checkpoint {
    pub fn new(config: SynthConfig, train: TrainConfig) -> Result<Self> {
        config.validate()?;
        train.validate()?;
        let mut rng = seeds::derived_rng(train.seed, "pixsynth.init", 0);
        let generator = SynthGenerator::new(&config, &mut rng)?;
        let discriminator = MultiScaleDiscriminator::new(&config, &mut rng)?;
        let g_opt = Adam::new(&generator.store, train.adam())?;
        let d_opt = Adam::new(&discriminator.store, train.adam())?;
        Ok(Self { config, train, epoch: 0, generator, discriminator, g_opt, d_opt })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = Meta {
            config: self.config.clone(),
            train: self.train.clone(),
            epoch: self.epoch,
            g_steps: self.g_opt.steps(),
            d_steps: self.d_opt.steps(),
        };
        let mut tensors = Vec::new();
        for (prefix, store) in [("generator", &self.generator.store), ("discriminator", &self.discriminator.store)] {
            tensors.extend(store.named_tensors().into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)));
        }
        tensors.extend(self.g_opt.named_state("adam_g"));
        tensors.extend(self.d_opt.named_state("adam_d"));
        archive::to_bytes(CHECKPOINT_MAGIC, &serde_json::to_value(meta)?, &tensors)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let archive = archive::from_bytes(CHECKPOINT_MAGIC, bytes)?;
        let meta: Meta = serde_json::from_value(archive.meta)?;
        let mut ckpt = Self::new(meta.config, meta.train)?;
        ckpt.epoch = meta.epoch;
        for (prefix, store) in [("generator.", &ckpt.generator.store), ("discriminator.", &ckpt.discriminator.store)] {
            let own = archive
                .tensors
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(prefix).map(|r| (r.to_string(), t.clone())))
                .collect();
            store.load(&own)?;
        }
        ckpt.g_opt.load_state("adam_g", meta.g_steps, &archive.tensors)?;
        ckpt.d_opt.load_state("adam_d", meta.d_steps, &archive.tensors)?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::path(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path).map_err(|e| Error::path(path, e))?)
    }

    fn seg_tensor(&self, maps: &[&SemanticMap]) -> Result<Tensor> {
        let (w, h) = self.config.operating_size;
        let k = self.config.num_classes;
        let mut data = Vec::with_capacity(maps.len() * k * w * h);
        for m in maps {
            if m.size() != (w, h) {
                return Err(Error::Contract(format!(
                    "map is {}x{}, translator operates at {w}x{h}",
                    m.width(),
                    m.height()
                )));
            }
            m.validate(k)?;
            data.extend(one_hot_chw(m, k)?);
        }
        tensor(data, &[maps.len(), k, h, w])
    }

    fn latent(&self, z: Option<&[f32]>, n: usize) -> Result<Option<Tensor>> {
        let d = self.config.latent_dim;
        match z {
            None if d == 0 => Ok(None),
            None => Ok(Some(tensor(vec![0.0; n * d], &[n, d])?)),
            Some(_) if d == 0 => Err(Error::Contract("translator was built without a latent input".into())),
            Some(z) if z.len() != n * d || z.iter().any(|v| !v.is_finite()) => {
                Err(Error::Contract(format!("latent must hold {} finite values", n * d)))
            }
            Some(z) => Ok(Some(tensor(z.to_vec(), &[n, d])?)),
        }
    }
}

/// Image for a map at the operating size. A missing latent is read as zeros
/// when the translator has a latent input.
pub fn translate(ckpt: &Checkpoint, map: &SemanticMap, z: Option<&[f32]>) -> Result<ImageTensor> {
    let seg = ckpt.seg_tensor(&[map])?;
    let out = ckpt.generator.forward(&seg, ckpt.latent(z, 1)?.as_ref())?;
    let (w, h) = ckpt.config.operating_size;
    ImageTensor::from_chw(w, h, &out.flatten_all()?.to_vec1::<f32>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthStep {
    pub step: usize,
    pub epoch: usize,
    /// Hinge loss summed over both scales.
    pub d_loss: f64,
    /// Full generator objective: adversarial term plus weighted feature
    /// matching.
    pub g_loss: f64,
    /// Unweighted feature-matching term.
    pub fm_loss: f64,
}

pub fn metrics_csv(log: &[SynthStep]) -> String {
    let mut out = format!("{METRICS_HEADER}\n");
    for s in log {
        out.push_str(&format!("{},{},{},{},{}\n", s.step, s.epoch, s.d_loss, s.g_loss, s.fm_loss));
    }
    out
}

fn finite(t: &Tensor, step: usize, epoch: usize, what: &str) -> Result<f64> {
    let v = f64::from(t.to_scalar::<f32>()?);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { step, epoch, detail: format!("{what} = {v}") })
    }
}

pub fn train_translation(
    pairs: &[(SemanticMap, ImageTensor)],
    cfg: &SynthConfig,
    tc: &TrainConfig,
) -> Result<(Checkpoint, Vec<SynthStep>)> {
    let mut ckpt = Checkpoint::new(cfg.clone(), tc.clone())?;
    let log = train_translation_more(&mut ckpt, pairs, tc.epochs)?;
    Ok((ckpt, log))
}

/// Hinge adversarial training on both scales with `lambda_fm`-weighted
/// feature matching for the generator.
pub fn train_translation_more(
    ckpt: &mut Checkpoint,
    pairs: &[(SemanticMap, ImageTensor)],
    epochs: usize,
) -> Result<Vec<SynthStep>> {
    run_translation(ckpt, pairs, epochs, usize::MAX)
}

/// Trains for exactly `steps` optimizer steps. A partially consumed final
/// epoch still advances the epoch counter.
pub fn train_translation_steps(
    ckpt: &mut Checkpoint,
    pairs: &[(SemanticMap, ImageTensor)],
    steps: usize,
) -> Result<Vec<SynthStep>> {
    let per_epoch = pairs.len().div_ceil(ckpt.train.batch_size.max(1)).max(1);
    run_translation(ckpt, pairs, steps.div_ceil(per_epoch), steps)
}

fn run_translation(
    ckpt: &mut Checkpoint,
    pairs: &[(SemanticMap, ImageTensor)],
    epochs: usize,
    max_steps: usize,
) -> Result<Vec<SynthStep>> {
    if pairs.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    let (w, h) = ckpt.config.operating_size;
    for (i, (_, img)) in pairs.iter().enumerate() {
        if (img.width, img.height) != (w, h) {
            return Err(Error::Contract(format!("image {i} is {}x{}, expected {w}x{h}", img.width, img.height)));
        }
    }
    let tc = ckpt.train.clone();
    let d = ckpt.config.latent_dim;
    let lambda = ckpt.config.lambda_fm;
    let mut log = Vec::new();
    let mut step = ckpt.d_opt.steps() as usize;
    for _ in 0..epochs {
        let epoch = ckpt.epoch;
        let mut rng = seeds::derived_rng(tc.seed, "pixsynth.epoch", epoch as u64);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut rng);
        for idx in order.chunks(tc.batch_size) {
            if log.len() == max_steps {
                break;
            }
            let n = idx.len();
            let maps: Vec<&SemanticMap> = idx.iter().map(|&i| &pairs[i].0).collect();
            let seg = ckpt.seg_tensor(&maps)?;
            let real_data: Vec<f32> = idx.iter().flat_map(|&i| pairs[i].1.to_chw()).collect();
            let real = tensor(real_data, &[n, 3, h, w])?;
            let z = if d > 0 { Some(tensor(randn(&mut rng, n * d), &[n, d])?) } else { None };
            let fake = ckpt.generator.forward(&seg, z.as_ref())?;

            let real_out = ckpt.discriminator.forward(&real, &seg)?;
            let fake_out = ckpt.discriminator.forward(&fake.detach(), &seg)?;
            let mut d_loss = discriminator_hinge_loss(&real_out[0].scores, &fake_out[0].scores)?;
            for s in 1..real_out.len() {
                d_loss = (d_loss + discriminator_hinge_loss(&real_out[s].scores, &fake_out[s].scores)?)?;
            }
            let d_value = finite(&d_loss, step, epoch, "d_loss")?;
            ckpt.d_opt.step(&d_loss.backward()?)?;

            let real_out = ckpt.discriminator.forward(&real, &seg)?;
            let fake_out = ckpt.discriminator.forward(&fake, &seg)?;
            let mut adv = generator_hinge_loss(&fake_out[0].scores)?;
            for s in fake_out.iter().skip(1) {
                adv = (adv + generator_hinge_loss(&s.scores)?)?;
            }
            let fm = feature_matching_l1(&real_out, &fake_out)?;
            let g_loss = (adv + fm.affine(lambda, 0.0)?)?;
            let fm_value = finite(&fm, step, epoch, "fm_loss")?;
            let g_value = finite(&g_loss, step, epoch, "g_loss")?;
            ckpt.g_opt.step(&g_loss.backward()?)?;

            log::debug!("pixsynth step {step}: d {d_value:.4} g {g_value:.4} fm {fm_value:.4}");
            log.push(SynthStep { step, epoch, d_loss: d_value, g_loss: g_value, fm_loss: fm_value });
            step += 1;
        }
        ckpt.epoch += 1;
    }
    Ok(log)
}
