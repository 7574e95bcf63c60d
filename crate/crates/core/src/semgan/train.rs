use std::path::Path;

use candle_core::Tensor;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::nn::{archive, randn, tensor, Adam, Mode, TrainConfig};
use crate::semgan::{discriminator_bce_loss, feature_matching_loss, Discriminator, Generator, SemGanConfig};
use crate::semmap::{decode_argmax, one_hot_chw, OneHotTensor, SemanticMap};
use crate::{seeds, Error, Result};

pub const CHECKPOINT_MAGIC: &str = "SEMGAN1";
pub const METRICS_HEADER: &str = "step,epoch,d_loss,g_loss";

/// Latents used for the per-epoch class histogram.
const EVAL_LATENTS: usize = 16;

/// Generator, discriminator, both optimizers and the run position.
pub struct Checkpoint {
    pub config: SemGanConfig,
    pub train: TrainConfig,
    pub epoch: usize,
    pub generator: Generator,
    pub discriminator: Discriminator,
    g_opt: Adam,
    d_opt: Adam,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    config: SemGanConfig,
    train: TrainConfig,
    epoch: usize,
    g_steps: u64,
    d_steps: u64,
}

impl Checkpoint {
    /// Freshly initialized networks, seeded from `train.seed`.
    pub fn new(config: SemGanConfig, train: TrainConfig) -> Result<Self> {
        config.validate()?;
        train.validate()?;
        let mut rng = seeds::derived_rng(train.seed, "semgan.init", 0);
        let generator = Generator::new(&config, &mut rng)?;
        let discriminator = Discriminator::new(&config, &mut rng)?;
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
        for (prefix, store) in [("generator", &ckpt.generator.store), ("discriminator", &ckpt.discriminator.store)] {
            let own = archive
                .tensors
                .iter()
                .filter_map(|(n, t)| {
                    n.strip_prefix(prefix).and_then(|r| r.strip_prefix('.')).map(|r| (r.to_string(), t.clone()))
                })
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

    /// Class probabilities `(n, k, r, r)` for a batch of latents, in
    /// evaluation mode.
    pub fn generate(&self, z: &[f32], n: usize) -> Result<Tensor> {
        let d = self.config.latent_dim;
        if z.len() != n * d {
            return Err(Error::Contract(format!("latent has {} values, expected {n} x {d}", z.len())));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract("latent contains non-finite values".into()));
        }
        self.generator.forward(&tensor(z.to_vec(), &[n, d])?, &Mode::Eval)
    }
}

/// Argmax map for one latent vector.
pub fn sample(ckpt: &Checkpoint, z: &[f32]) -> Result<SemanticMap> {
    let probs = ckpt.generate(z, 1)?;
    let r = ckpt.config.resolution;
    let chw = probs.flatten_all()?.to_vec1::<f32>()?;
    decode_argmax(&OneHotTensor::from_chw(ckpt.config.num_classes, r, r, &chw)?)
}

/// Standard-normal latent of the checkpoint's dimension.
pub fn sample_latent(ckpt: &Checkpoint, rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f32> {
    randn(rng, ckpt.config.latent_dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLoss {
    pub step: usize,
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub log: Vec<StepLoss>,
    /// Class frequencies of the training maps.
    pub data_histogram: Vec<f64>,
    /// Class frequencies of generated maps from a fixed latent set: entry 0
    /// before training, entry `e` after epoch `e`.
    pub histograms: Vec<Vec<f64>>,
}

impl TrainReport {
    pub fn metrics_csv(&self) -> String {
        let mut out = format!("{METRICS_HEADER}\n");
        for s in &self.log {
            out.push_str(&format!("{},{},{},{}\n", s.step, s.epoch, s.d_loss, s.g_loss));
        }
        out
    }

    /// Jensen-Shannon divergence of each generated histogram to the data.
    pub fn js_trace(&self) -> Vec<f64> {
        self.histograms.iter().map(|h| js_divergence(h, &self.data_histogram)).collect()
    }
}

/// Normalized class frequencies over a set of maps.
pub fn class_frequencies<'a>(maps: impl IntoIterator<Item = &'a SemanticMap>, k: usize) -> Vec<f64> {
    let mut counts = vec![0u64; k];
    for m in maps {
        for (c, n) in counts.iter_mut().zip(m.class_histogram(k)) {
            *c += n;
        }
    }
    let total = counts.iter().sum::<u64>().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

/// Jensen-Shannon divergence in nats; zero-probability terms contribute 0.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter().zip(m).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x / y).ln()).sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * kl(p, &m) + 0.5 * kl(q, &m)
}

fn check_dataset(dataset: &[SemanticMap], cfg: &SemGanConfig) -> Result<()> {
    if dataset.is_empty() {
        return Err(Error::DatasetEmpty);
    }
    for (i, m) in dataset.iter().enumerate() {
        if m.size() != (cfg.resolution, cfg.resolution) {
            return Err(Error::Contract(format!(
                "map {i} is {}x{}, expected {r}x{r}",
                m.width(),
                m.height(),
                r = cfg.resolution
            )));
        }
        m.validate(cfg.num_classes)?;
    }
    Ok(())
}

fn batch_tensor(dataset: &[SemanticMap], idx: &[usize], cfg: &SemGanConfig) -> Result<Tensor> {
    let r = cfg.resolution;
    let mut data = Vec::with_capacity(idx.len() * cfg.num_classes * r * r);
    for &i in idx {
        data.extend(one_hot_chw(&dataset[i], cfg.num_classes)?);
    }
    tensor(data, &[idx.len(), cfg.num_classes, r, r])
}

fn generated_histogram(ckpt: &Checkpoint, latents: &[f32]) -> Result<Vec<f64>> {
    let d = ckpt.config.latent_dim;
    let maps = latents.chunks(d).map(|z| sample(ckpt, z)).collect::<Result<Vec<_>>>()?;
    Ok(class_frequencies(&maps, ckpt.config.num_classes))
}

fn finite(v: f64, step: usize, epoch: usize, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteLoss { step, epoch, detail: format!("{what} = {v}") })
    }
}

/// Adversarial training from fresh weights.
pub fn train(dataset: &[SemanticMap], cfg: &SemGanConfig, tc: &TrainConfig) -> Result<(Checkpoint, TrainReport)> {
    check_dataset(dataset, cfg)?;
    let mut ckpt = Checkpoint::new(cfg.clone(), tc.clone())?;
    let report = train_more(&mut ckpt, dataset, tc.epochs)?;
    Ok((ckpt, report))
}

/// Continues training `ckpt` for `epochs` further epochs.
///
/// Each step updates the discriminator on cross-entropy between real maps
/// and detached generated maps, then the generator on feature matching at
/// the configured tap.
pub fn train_more(ckpt: &mut Checkpoint, dataset: &[SemanticMap], epochs: usize) -> Result<TrainReport> {
    let cfg = ckpt.config.clone();
    let tc = ckpt.train.clone();
    check_dataset(dataset, &cfg)?;
    let eval_latents = randn(&mut seeds::derived_rng(tc.seed, "semgan.eval", 0), EVAL_LATENTS * cfg.latent_dim);
    let mut report = TrainReport {
        log: Vec::new(),
        data_histogram: class_frequencies(dataset, cfg.num_classes),
        histograms: vec![generated_histogram(ckpt, &eval_latents)?],
    };
    let mut step = ckpt.d_opt.steps() as usize;
    for _ in 0..epochs {
        let epoch = ckpt.epoch;
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        order.shuffle(&mut seeds::derived_rng(tc.seed, "semgan.shuffle", epoch as u64));
        let mut latent_rng = seeds::derived_rng(tc.seed, "semgan.latent", epoch as u64);
        let mut noise_rng = seeds::derived_rng(tc.seed, "semgan.dropout", epoch as u64);
        for idx in order.chunks(tc.batch_size) {
            let n = idx.len();
            let real = batch_tensor(dataset, idx, &cfg)?;
            let z = tensor(randn(&mut latent_rng, n * cfg.latent_dim), &[n, cfg.latent_dim])?;
            let fake = ckpt.generator.forward(&z, &Mode::Train(&mut noise_rng))?;

            let d_real = ckpt.discriminator.forward(&real, &mut Mode::Train(&mut noise_rng))?;
            let d_fake = ckpt.discriminator.forward(&fake.detach(), &mut Mode::Train(&mut noise_rng))?;
            let d_loss = discriminator_bce_loss(&d_real.scores, &d_fake.scores)?;
            let d_value = finite(f64::from(d_loss.to_scalar::<f32>()?), step, epoch, "d_loss")?;
            ckpt.d_opt.step(&d_loss.backward()?)?;

            let real_features = ckpt.discriminator.forward(&real, &mut Mode::Train(&mut noise_rng))?.features.detach();
            let fake_features = ckpt.discriminator.forward(&fake, &mut Mode::Train(&mut noise_rng))?.features;
            let g_loss = feature_matching_loss(&real_features, &fake_features)?;
            let g_value = finite(f64::from(g_loss.to_scalar::<f32>()?), step, epoch, "g_loss")?;
            ckpt.g_opt.step(&g_loss.backward()?)?;

            log::debug!("semgan step {step} epoch {epoch}: d_loss {d_value:.5} g_loss {g_value:.5}");
            report.log.push(StepLoss { step, epoch, d_loss: d_value, g_loss: g_value });
            step += 1;
        }
        ckpt.epoch += 1;
        let hist = generated_histogram(ckpt, &eval_latents)?;
        log::info!("semgan epoch {} done: js to data {:.4}", ckpt.epoch, js_divergence(&hist, &report.data_histogram));
        report.histograms.push(hist);
    }
    Ok(report)
}
