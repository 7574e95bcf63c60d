use candle_core::Tensor;
use rand_chacha::ChaCha8Rng;

use crate::nn::{ops, Conv2d, LayerInfo, LayerKind, ParamStore};
use crate::pixsynth::SynthConfig;
use crate::{Error, Result};

const SLOPE: f64 = 0.2;
const NORM_EPS: f64 = 1e-5;

/// Nearest downsampling of an NCHW tensor by an integer factor: output pixel
/// `(x, y)` reads input pixel `(x * f, y * f)`.
pub fn downsample_nearest(x: &Tensor, factor: usize) -> Result<Tensor> {
    if factor == 1 {
        return Ok(x.clone());
    }
    let (n, c, h, w) = x.dims4()?;
    if h % factor != 0 || w % factor != 0 {
        return Err(Error::Contract(format!("{w}x{h} is not divisible by {factor}")));
    }
    let (hh, ww) = (h / factor, w / factor);
    Ok(x.reshape((n, c, hh, factor, ww, factor))?
        .narrow(3, 0, 1)?
        .narrow(5, 0, 1)?
        .contiguous()?
        .reshape((n, c, hh, ww))?)
}

/// Per-channel normalization over batch and spatial axes without affine
/// parameters, then `normalized * gamma + beta`.
pub fn spatially_adaptive_norm(features: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<Tensor> {
    if gamma.dims() != features.dims() || beta.dims() != features.dims() {
        return Err(Error::Contract(format!(
            "modulation {:?}/{:?} does not match features {:?}",
            gamma.dims(),
            beta.dims(),
            features.dims()
        )));
    }
    let (_, c, _, _) = features.dims4()?;
    let xt = features.transpose(0, 1)?.contiguous()?.reshape((c, ()))?;
    let mean = xt.mean_keepdim(1)?;
    let centered = xt.broadcast_sub(&mean)?;
    let var = centered.sqr()?.mean_keepdim(1)?;
    let normalized = centered.broadcast_div(&(var + NORM_EPS)?.sqrt()?)?;
    let (n, _, h, w) = features.dims4()?;
    let normalized = normalized.reshape((c, n, h, w))?.transpose(0, 1)?;
    Ok(normalized.mul(gamma)?.add(beta)?)
}

/// Normalization whose per-pixel scale and shift come from the semantic
/// map: a shared 3x3 convolution with leaky activation followed by
/// separate 3x3 convolutions for `gamma` and `beta`. The `gamma` bias starts
/// at one so a fresh layer is close to plain normalization.
pub struct SpadeNorm {
    pub name: String,
    pub shared: Conv2d,
    pub gamma: Conv2d,
    pub beta: Conv2d,
    channels: usize,
}

impl SpadeNorm {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        classes: usize,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let shared = Conv2d::new(store, &format!("{name}.shared"), classes, hidden, (3, 3), 1, 1, true, rng)?;
        let gamma = Conv2d::new(store, &format!("{name}.gamma"), hidden, channels, (3, 3), 1, 1, true, rng)?;
        let beta = Conv2d::new(store, &format!("{name}.beta"), hidden, channels, (3, 3), 1, 1, true, rng)?;
        gamma.fill_bias(1.0)?;
        Ok(Self { name: name.to_string(), shared, gamma, beta, channels })
    }

    /// `seg` must already have the spatial size of `x`.
    pub fn forward(&self, x: &Tensor, seg: &Tensor) -> Result<Tensor> {
        let (_, _, h, w) = x.dims4()?;
        let (_, _, sh, sw) = seg.dims4()?;
        if (sh, sw) != (h, w) {
            return Err(Error::Contract(format!("segmentation {sw}x{sh} does not match features {w}x{h}")));
        }
        let a = ops::leaky_relu(&self.shared.forward(seg)?, SLOPE)?;
        spatially_adaptive_norm(x, &self.gamma.forward(&a)?, &self.beta.forward(&a)?)
    }

    fn layers(&self, out: &mut Vec<LayerInfo>) {
        out.push(LayerInfo::new(self.name.clone(), LayerKind::SpatiallyAdaptiveNorm { channels: self.channels }));
        out.push(self.shared.info());
        out.push(self.gamma.info());
        out.push(self.beta.info());
    }
}

/// Residual block: two normalization + activation + 3x3 convolution
/// stages, with a normalized 1x1 shortcut when the width changes.
struct SpadeBlock {
    norm0: SpadeNorm,
    conv0: Conv2d,
    norm1: SpadeNorm,
    conv1: Conv2d,
    shortcut: Option<(SpadeNorm, Conv2d)>,
}

impl SpadeBlock {
    fn new(
        store: &mut ParamStore,
        name: &str,
        c_in: usize,
        c_out: usize,
        cfg: &SynthConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mid = c_in.min(c_out);
        let k = cfg.num_classes;
        let hidden = cfg.norm_hidden;
        let norm0 = SpadeNorm::new(store, &format!("{name}.norm0"), c_in, k, hidden, rng)?;
        let conv0 = Conv2d::new(store, &format!("{name}.conv0"), c_in, mid, (3, 3), 1, 1, true, rng)?;
        let norm1 = SpadeNorm::new(store, &format!("{name}.norm1"), mid, k, hidden, rng)?;
        let conv1 = Conv2d::new(store, &format!("{name}.conv1"), mid, c_out, (3, 3), 1, 1, true, rng)?;
        let shortcut = if c_in != c_out {
            Some((
                SpadeNorm::new(store, &format!("{name}.norm_s"), c_in, k, hidden, rng)?,
                Conv2d::new(store, &format!("{name}.conv_s"), c_in, c_out, (1, 1), 1, 0, false, rng)?,
            ))
        } else {
            None
        };
        Ok(Self { norm0, conv0, norm1, conv1, shortcut })
    }

    fn forward(&self, x: &Tensor, seg: &Tensor) -> Result<Tensor> {
        let dx = self.conv0.forward(&ops::leaky_relu(&self.norm0.forward(x, seg)?, SLOPE)?)?;
        let dx = self.conv1.forward(&ops::leaky_relu(&self.norm1.forward(&dx, seg)?, SLOPE)?)?;
        let skip = match &self.shortcut {
            Some((norm, conv)) => conv.forward(&norm.forward(x, seg)?)?,
            None => x.clone(),
        };
        Ok((skip + dx)?)
    }

    fn layers(&self, out: &mut Vec<LayerInfo>) {
        self.norm0.layers(out);
        out.push(self.conv0.info());
        self.norm1.layers(out);
        out.push(self.conv1.info());
        if let Some((norm, conv)) = &self.shortcut {
            norm.layers(out);
            out.push(conv.info());
        }
    }
}

/// Map-to-image generator.
///
/// The one-hot map, downsampled to the seed grid, goes through a 3x3
/// convolution (plus a 1x1-projected latent when enabled). Each block
/// doubles the size and applies a residual block conditioned on the map at
/// that size. A leaky activation, a 3x3 convolution to three channels and
/// `tanh` produce the image.
pub struct SynthGenerator {
    pub store: ParamStore,
    input: Conv2d,
    latent: Option<Conv2d>,
    blocks: Vec<SpadeBlock>,
    out: Conv2d,
    num_blocks: usize,
}

impl SynthGenerator {
    pub fn new(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let nb = cfg.num_upsample_blocks;
        let width = |level: usize| (cfg.base_channels << (nb - level)).min(cfg.base_channels * 8);
        let mut store = ParamStore::new();
        let input = Conv2d::new(&mut store, "input", cfg.num_classes, width(0), (3, 3), 1, 1, true, rng)?;
        let latent = if cfg.latent_dim > 0 {
            Some(Conv2d::new(&mut store, "latent", cfg.latent_dim, width(0), (1, 1), 1, 0, false, rng)?)
        } else {
            None
        };
        let blocks = (1..=nb)
            .map(|l| SpadeBlock::new(&mut store, &format!("block{l}"), width(l - 1), width(l), cfg, rng))
            .collect::<Result<_>>()?;
        let out = Conv2d::new(&mut store, "out", width(nb), 3, (3, 3), 1, 1, true, rng)?;
        Ok(Self { store, input, latent, blocks, out, num_blocks: nb })
    }

    /// `seg: (n, k, h, w)` one-hot, optional `z: (n, d)`; output
    /// `(n, 3, h, w)` in [-1, 1].
    pub fn forward(&self, seg: &Tensor, z: Option<&Tensor>) -> Result<Tensor> {
        let mut x = self.input.forward(&downsample_nearest(seg, 1 << self.num_blocks)?)?;
        match (&self.latent, z) {
            (Some(conv), Some(z)) => {
                let (n, d) = z.dims2()?;
                x = x.broadcast_add(&conv.forward(&z.reshape((n, d, 1, 1))?)?)?;
            }
            (None, Some(_)) => return Err(Error::Contract("generator has no latent input".into())),
            _ => {}
        }
        for (i, block) in self.blocks.iter().enumerate() {
            x = ops::upsample_nearest(&x, 2)?;
            let s = downsample_nearest(seg, 1 << (self.num_blocks - i - 1))?;
            x = block.forward(&x, &s)?;
        }
        let x = self.out.forward(&ops::leaky_relu(&x, SLOPE)?)?;
        Ok(x.tanh()?)
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = vec![self.input.info()];
        out.extend(self.latent.as_ref().map(|c| c.info()));
        for (i, b) in self.blocks.iter().enumerate() {
            out.push(LayerInfo::new(format!("block{}.upsample", i + 1), LayerKind::Upsample { factor: 2 }));
            b.layers(&mut out);
        }
        out.push(LayerInfo::new("out.act", LayerKind::LeakyRelu));
        out.push(self.out.info());
        out.push(LayerInfo::new("out.tanh", LayerKind::Tanh));
        out
    }
}

/// Output of one patch discriminator.
pub struct ScaleOutput {
    /// Patch scores `(n, 1, h/4, w/4)` of this scale's input.
    pub scores: Tensor,
    /// Post-activation outputs of the three hidden layers.
    pub features: Vec<Tensor>,
}

struct PatchDisc {
    convs: Vec<Conv2d>,
    head: Conv2d,
}

impl PatchDisc {
    fn new(store: &mut ParamStore, name: &str, c_in: usize, c: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        let convs = vec![
            Conv2d::new(store, &format!("{name}.conv1"), c_in, c, (4, 4), 2, 1, true, rng)?,
            Conv2d::new(store, &format!("{name}.conv2"), c, 2 * c, (4, 4), 2, 1, true, rng)?,
            Conv2d::new(store, &format!("{name}.conv3"), 2 * c, 4 * c, (3, 3), 1, 1, true, rng)?,
        ];
        let head = Conv2d::new(store, &format!("{name}.score"), 4 * c, 1, (3, 3), 1, 1, true, rng)?;
        Ok(Self { convs, head })
    }

    fn forward(&self, x: &Tensor) -> Result<ScaleOutput> {
        let mut x = x.clone();
        let mut features = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            x = ops::leaky_relu(&conv.forward(&x)?, SLOPE)?;
            features.push(x.clone());
        }
        Ok(ScaleOutput { scores: self.head.forward(&x)?, features })
    }
}

/// Two patch discriminators over the concatenated image and map: scale 0
/// at full size, scale 1 on a 2x2 average-pooled copy.
pub struct MultiScaleDiscriminator {
    pub store: ParamStore,
    scales: [PatchDisc; 2],
}

pub const NUM_SCALES: usize = 2;

impl MultiScaleDiscriminator {
    pub fn new(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let c_in = 3 + cfg.num_classes;
        let s0 = PatchDisc::new(&mut store, "scale0", c_in, cfg.disc_channels, rng)?;
        let s1 = PatchDisc::new(&mut store, "scale1", c_in, cfg.disc_channels, rng)?;
        Ok(Self { store, scales: [s0, s1] })
    }

    /// Inputs to each scale: the concatenation, then its 2x2 average pool.
    pub fn scale_inputs(image: &Tensor, seg: &Tensor) -> Result<[Tensor; 2]> {
        let (ni, ci, hi, wi) = image.dims4()?;
        let (ns, _, hs, ws) = seg.dims4()?;
        if ci != 3 || (ni, hi, wi) != (ns, hs, ws) {
            return Err(Error::Contract(format!("image {:?} and map {:?} are not aligned", image.dims(), seg.dims())));
        }
        let x = Tensor::cat(&[image, seg], 1)?;
        let half = x.avg_pool2d(2)?;
        Ok([x, half])
    }

    pub fn forward(&self, image: &Tensor, seg: &Tensor) -> Result<Vec<ScaleOutput>> {
        let inputs = Self::scale_inputs(image, seg)?;
        self.scales.iter().zip(&inputs).map(|(d, x)| d.forward(x)).collect()
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = Vec::new();
        for (i, d) in self.scales.iter().enumerate() {
            if i > 0 {
                out.push(LayerInfo::new(format!("scale{i}.pool"), LayerKind::AvgPool { factor: 2 }));
            }
            for c in &d.convs {
                out.push(c.info());
                out.push(LayerInfo::new(format!("{}.act", c.name), LayerKind::LeakyRelu));
            }
            out.push(d.head.info());
        }
        out
    }
}
