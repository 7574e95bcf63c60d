use candle_core::Tensor;
use rand_chacha::ChaCha8Rng;

use crate::instafill::{InsertionConfig, MASK_SIZE};
use crate::nn::{ops, Conv2d, LayerInfo, LayerKind, ParamStore, DEVICE};
use crate::Result;

const SLOPE: f64 = 0.2;

/// Stack of 4x4 stride-2 convolutions with leaky activations.
struct Encoder {
    convs: Vec<Conv2d>,
}

impl Encoder {
    fn new(store: &mut ParamStore, prefix: &str, c_in: usize, widths: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut convs = Vec::with_capacity(widths.len());
        let mut c = c_in;
        for (i, &w) in widths.iter().enumerate() {
            convs.push(Conv2d::new(store, &format!("{prefix}.down{}", i + 1), c, w, (4, 4), 2, 1, true, rng)?);
            c = w;
        }
        Ok(Self { convs })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut x = x.clone();
        for conv in &self.convs {
            x = ops::leaky_relu(&conv.forward(&x)?, SLOPE)?;
        }
        Ok(x)
    }

    fn layers(&self, out: &mut Vec<LayerInfo>) {
        for conv in &self.convs {
            out.push(conv.info());
            out.push(LayerInfo::new(format!("{}.act", conv.name), LayerKind::LeakyRelu));
        }
    }
}

/// Real/fake score from a patch encoder, a 3x3 convolution to one channel,
/// a spatial mean and a logistic squashing.
pub struct PatchCritic {
    pub store: ParamStore,
    encoder: Encoder,
    head: Conv2d,
}

impl PatchCritic {
    pub fn new(c_in: usize, base: usize, depth: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut store = ParamStore::new();
        let widths: Vec<usize> = (0..depth).map(|i| base << i.min(2)).collect();
        let encoder = Encoder::new(&mut store, "critic", c_in, &widths, rng)?;
        let head = Conv2d::new(&mut store, "critic.score", widths[depth - 1], 1, (3, 3), 1, 1, true, rng)?;
        Ok(Self { store, encoder, head })
    }

    /// Scores in (0, 1), shape `(n,)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let logits = ops::mean_per_sample(&self.head.forward(&self.encoder.forward(x)?)?)?;
        Ok(ops::sigmoid(&logits)?)
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = Vec::new();
        self.encoder.layers(&mut out);
        out.push(self.head.info());
        out.push(LayerInfo::new("critic.mean", LayerKind::GlobalMean));
        out.push(LayerInfo::new("critic.sigmoid", LayerKind::Sigmoid));
        out
    }
}

/// Raw placement outputs, each `(n,)`.
pub struct Placement {
    pub cx: Tensor,
    pub cy: Tensor,
    pub log_scale: Tensor,
}

/// Placement generator over a quarter-resolution one-hot map.
///
/// Four strided convolutions reduce the map to `(h/16, w/16)`; a
/// convolution spanning that whole grid summarizes it to one cell, the
/// latent is concatenated, and two 1x1 convolutions emit three values. The
/// center is squashed into `[0, 1]` and the log-scale into
/// `[ln scale_min, ln scale_max]`, so every output is a valid placement
/// regardless of the weights.
pub struct WhereGenerator {
    pub store: ParamStore,
    encoder: Encoder,
    summary: Conv2d,
    hidden: Conv2d,
    out: Conv2d,
    log_min: f64,
    log_max: f64,
}

impl WhereGenerator {
    pub fn new(cfg: &InsertionConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut store = ParamStore::new();
        let b = cfg.base_channels;
        let widths = [b, 2 * b, 4 * b, 4 * b];
        let encoder = Encoder::new(&mut store, "where", cfg.num_classes, &widths, rng)?;
        let (ww, wh) = cfg.where_size();
        let summary = Conv2d::new(&mut store, "where.summary", 4 * b, 8 * b, (wh / 16, ww / 16), 1, 0, true, rng)?;
        let hidden = Conv2d::new(&mut store, "where.hidden", 8 * b + cfg.latent_dim, 8 * b, (1, 1), 1, 0, true, rng)?;
        let out = Conv2d::new(&mut store, "where.out", 8 * b, 3, (1, 1), 1, 0, true, rng)?;
        Ok(Self { store, encoder, summary, hidden, out, log_min: cfg.scale_min.ln(), log_max: cfg.scale_max.ln() })
    }

    /// `map: (n, k, h/4, w/4)` one-hot, `z: (n, d)`.
    pub fn forward(&self, map: &Tensor, z: &Tensor) -> Result<Placement> {
        let (n, d) = z.dims2()?;
        let s = ops::leaky_relu(&self.summary.forward(&self.encoder.forward(map)?)?, SLOPE)?;
        let x = Tensor::cat(&[&s, &z.reshape((n, d, 1, 1))?], 1)?;
        let x = ops::leaky_relu(&self.hidden.forward(&x)?, SLOPE)?;
        let o = self.out.forward(&x)?.reshape((n, 3))?;
        let unit = ops::sigmoid(&o)?;
        let log_scale = unit.narrow(1, 2, 1)?.affine(self.log_max - self.log_min, self.log_min)?;
        Ok(Placement {
            cx: unit.narrow(1, 0, 1)?.squeeze(1)?,
            cy: unit.narrow(1, 1, 1)?.squeeze(1)?,
            log_scale: log_scale.squeeze(1)?,
        })
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = Vec::new();
        self.encoder.layers(&mut out);
        for c in [&self.summary, &self.hidden] {
            out.push(c.info());
            out.push(LayerInfo::new(format!("{}.act", c.name), LayerKind::LeakyRelu));
        }
        out.push(self.out.info());
        out.push(LayerInfo::new("where.squash", LayerKind::Sigmoid));
        out
    }
}

/// Silhouette generator over a 128x128 one-hot context window.
///
/// Encoder to 8x8, latent injected by a 1x1 convolution and added at every
/// bottleneck cell, then four nearest-upsampling 3x3 convolution blocks and
/// a final 3x3 convolution with a logistic output.
pub struct WhatGenerator {
    pub store: ParamStore,
    encoder: Encoder,
    latent: Conv2d,
    decoder: Vec<Conv2d>,
    out: Conv2d,
}

impl WhatGenerator {
    pub fn new(cfg: &InsertionConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut store = ParamStore::new();
        let b = cfg.base_channels;
        let widths = [b, 2 * b, 4 * b, 4 * b];
        let encoder = Encoder::new(&mut store, "what", cfg.num_classes, &widths, rng)?;
        let latent = Conv2d::new(&mut store, "what.latent", cfg.latent_dim, 4 * b, (1, 1), 1, 0, true, rng)?;
        let dec = [(4 * b, 4 * b), (4 * b, 2 * b), (2 * b, b), (b, b)];
        let decoder = dec
            .iter()
            .enumerate()
            .map(|(i, &(ci, co))| {
                Conv2d::new(&mut store, &format!("what.up{}", i + 1), ci, co, (3, 3), 1, 1, true, rng)
            })
            .collect::<Result<_>>()?;
        let out = Conv2d::new(&mut store, "what.out", b, 1, (3, 3), 1, 1, true, rng)?;
        Ok(Self { store, encoder, latent, decoder, out })
    }

    /// `context: (n, k, 128, 128)`, `z: (n, d)` to `(n, 1, 128, 128)` in [0, 1].
    pub fn forward(&self, context: &Tensor, z: &Tensor) -> Result<Tensor> {
        let (n, d) = z.dims2()?;
        let h = self.encoder.forward(context)?;
        let zc = self.latent.forward(&z.reshape((n, d, 1, 1))?)?;
        let mut x = h.broadcast_add(&zc)?;
        for conv in &self.decoder {
            x = ops::leaky_relu(&conv.forward(&ops::upsample_nearest(&x, 2)?)?, SLOPE)?;
        }
        Ok(ops::sigmoid(&self.out.forward(&x)?)?)
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = Vec::new();
        self.encoder.layers(&mut out);
        out.push(self.latent.info());
        for conv in &self.decoder {
            out.push(LayerInfo::new(format!("{}.upsample", conv.name), LayerKind::Upsample { factor: 2 }));
            out.push(conv.info());
            out.push(LayerInfo::new(format!("{}.act", conv.name), LayerKind::LeakyRelu));
        }
        out.push(self.out.info());
        out.push(LayerInfo::new("what.sigmoid", LayerKind::Sigmoid));
        out
    }
}

/// Differentiable rendering of square footprints on a `(w, h)` grid.
///
/// Each axis profile is `sigmoid((p - lo) / t) * sigmoid((hi - p) / t)` over
/// pixel centers with a one-pixel temperature; the footprint side is
/// `128 * exp(log_scale) * w / full_w`.
pub fn render_footprint(p: &Placement, grid: (usize, usize), full_width: usize) -> Result<Tensor> {
    let (w, h) = grid;
    let n = p.cx.dim(0)?;
    let half = p.log_scale.exp()?.affine(MASK_SIZE as f64 * w as f64 / full_width as f64 / 2.0, 0.0)?;
    let profile = |center: &Tensor, len: usize| -> Result<Tensor> {
        let pos = Tensor::arange(0u32, len as u32, &DEVICE)?.to_dtype(candle_core::DType::F32)?.affine(1.0, 0.5)?;
        let pos = pos.reshape((1, len))?;
        let c = center.affine(len as f64, 0.0)?.reshape((n, 1))?;
        let hw = half.reshape((n, 1))?;
        let lo = pos.broadcast_sub(&(&c - &hw)?)?;
        let hi = (&c + &hw)?.broadcast_sub(&pos)?;
        Ok((ops::sigmoid(&lo)? * ops::sigmoid(&hi)?)?)
    };
    let px = profile(&p.cx, w)?.reshape((n, 1, 1, w))?;
    let py = profile(&p.cy, h)?.reshape((n, 1, h, 1))?;
    Ok(py.broadcast_mul(&px)?)
}
