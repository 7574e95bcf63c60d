use candle_core::Tensor;
use rand_chacha::ChaCha8Rng;

use crate::nn::{ops, AlphaDropout, BatchNorm2d, Conv2d, LayerInfo, LayerKind, Mode, ParamStore};
use crate::semgan::SemGanConfig;
use crate::{Error, Result};

/// Latent vector to per-pixel class distribution.
///
/// `z` is treated as a `(d, 1, 1)` grid; a 1x1 convolution produces
/// `16 * c0` channels that are folded into a `(c0, 4, 4)` seed grid. Each
/// block then doubles the spatial size (nearest upsampling, 3x3 conv, batch
/// norm, SELU). A 1x1 convolution to `k` channels and a channel softmax
/// close the network.
pub struct Generator {
    pub store: ParamStore,
    seed_channels: usize,
    project: Conv2d,
    project_bn: BatchNorm2d,
    blocks: Vec<(Conv2d, BatchNorm2d)>,
    head: Conv2d,
}

impl Generator {
    pub fn new(cfg: &SemGanConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let nb = cfg.num_blocks();
        if 4 << nb != cfg.resolution {
            return Err(Error::Config(format!("{nb} blocks cannot reach resolution {}", cfg.resolution)));
        }
        let channels = |level: usize| (cfg.base_channels << (nb - level)).min(cfg.cap());
        let mut store = ParamStore::new();
        let c0 = channels(0);
        let project = Conv2d::new(&mut store, "project", cfg.latent_dim, c0 * 16, (1, 1), 1, 0, true, rng)?;
        let project_bn = BatchNorm2d::new(&mut store, "project_bn", c0)?;
        let mut blocks = Vec::with_capacity(nb);
        for level in 1..=nb {
            let name = format!("block{level}");
            let conv = Conv2d::new(
                &mut store,
                &format!("{name}.conv"),
                channels(level - 1),
                channels(level),
                (3, 3),
                1,
                1,
                true,
                rng,
            )?;
            let bn = BatchNorm2d::new(&mut store, &format!("{name}.bn"), channels(level))?;
            blocks.push((conv, bn));
        }
        let head = Conv2d::new(&mut store, "head", channels(nb), cfg.num_classes, (1, 1), 1, 0, true, rng)?;
        Ok(Self { store, seed_channels: c0, project, project_bn, blocks, head })
    }

    /// `z: (n, d)` to class probabilities `(n, k, r, r)`.
    pub fn forward(&self, z: &Tensor, mode: &Mode) -> Result<Tensor> {
        let (n, d) = z.dims2()?;
        let x = self.project.forward(&z.reshape((n, d, 1, 1))?)?;
        let x = x.reshape((n, self.seed_channels, 4, 4))?;
        let mut x = ops::selu(&self.project_bn.forward(&x, mode)?)?;
        for (conv, bn) in &self.blocks {
            x = ops::upsample_nearest(&x, 2)?;
            x = ops::selu(&bn.forward(&conv.forward(&x)?, mode)?)?;
        }
        Ok(ops::softmax_channels(&self.head.forward(&x)?)?)
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = vec![self.project.info(), self.project_bn.info(), LayerInfo::new("project_act", LayerKind::Selu)];
        for (i, (conv, bn)) in self.blocks.iter().enumerate() {
            out.push(LayerInfo::new(format!("block{}.up", i + 1), LayerKind::Upsample { factor: 2 }));
            out.push(conv.info());
            out.push(bn.info());
            out.push(LayerInfo::new(format!("block{}.act", i + 1), LayerKind::Selu));
        }
        out.push(self.head.info());
        out.push(LayerInfo::new("softmax", LayerKind::Softmax));
        out
    }
}

/// Output of one discriminator pass.
pub struct DiscOutput {
    /// Realness in (0, 1), shape `(n,)`.
    pub scores: Tensor,
    /// Post-activation output of the tapped convolution.
    pub features: Tensor,
}

/// Fully convolutional realness score over a one-hot map.
///
/// Block `i` is a 3x3 stride-1 convolution and a 4x4 stride-2 convolution,
/// each followed by SELU, then AlphaDropout. Convolutions are numbered
/// `conv1, conv2, ...` in order, so `conv6` is the strided convolution of the
/// third block with `4 * base` channels at `r/8 x r/8`. A 3x3 convolution to
/// one channel, a spatial mean and a logistic squashing produce the score.
pub struct Discriminator {
    pub store: ParamStore,
    convs: Vec<Conv2d>,
    dropouts: Vec<AlphaDropout>,
    head: Conv2d,
    tap: usize,
}

impl Discriminator {
    pub fn new(cfg: &SemGanConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let nb = cfg.num_blocks();
        let tap = cfg.tap_index()?;
        if 2 * nb < 6 {
            return Err(Error::Config(format!(
                "resolution {} gives {} convolutions; at least six are required",
                cfg.resolution,
                2 * nb
            )));
        }
        if tap > 2 * nb {
            return Err(Error::Config(format!(
                "feature tap {} does not exist ({} convolutions)",
                cfg.feature_tap,
                2 * nb
            )));
        }
        let mut store = ParamStore::new();
        let channels = |i: usize| (cfg.base_channels << i).min(cfg.cap());
        let mut convs = Vec::with_capacity(2 * nb);
        let mut dropouts = Vec::with_capacity(nb);
        let mut c_in = cfg.num_classes;
        for i in 0..nb {
            let c = channels(i);
            let a = 2 * i + 1;
            convs.push(Conv2d::new(&mut store, &format!("conv{a}"), c_in, c, (3, 3), 1, 1, true, rng)?);
            convs.push(Conv2d::new(&mut store, &format!("conv{}", a + 1), c, c, (4, 4), 2, 1, true, rng)?);
            dropouts.push(AlphaDropout::new(&format!("dropout{}", i + 1), cfg.dropout_rate));
            c_in = c;
        }
        let head = Conv2d::new(&mut store, "score", c_in, 1, (3, 3), 1, 1, true, rng)?;
        Ok(Self { store, convs, dropouts, head, tap })
    }

    pub fn forward(&self, x: &Tensor, mode: &mut Mode) -> Result<DiscOutput> {
        let mut x = x.clone();
        let mut features = None;
        for (i, conv) in self.convs.iter().enumerate() {
            x = ops::selu(&conv.forward(&x)?)?;
            if i + 1 == self.tap {
                features = Some(x.clone());
            }
            if i % 2 == 1 {
                x = self.dropouts[i / 2].forward(&x, mode)?;
            }
        }
        let logits = ops::mean_per_sample(&self.head.forward(&x)?)?;
        Ok(DiscOutput { scores: ops::sigmoid(&logits)?, features: features.expect("tap index validated") })
    }

    /// Expected `(channels, height, width)` of the tapped features.
    pub fn tap_shape(cfg: &SemGanConfig) -> Result<(usize, usize, usize)> {
        let tap = cfg.tap_index()?;
        let block = (tap - 1) / 2;
        let channels = (cfg.base_channels << block).min(cfg.cap());
        let side = cfg.resolution >> (tap / 2);
        Ok((channels, side, side))
    }

    pub fn layers(&self) -> Vec<LayerInfo> {
        let mut out = Vec::new();
        for (i, conv) in self.convs.iter().enumerate() {
            out.push(conv.info());
            out.push(LayerInfo::new(format!("{}.act", conv.name), LayerKind::Selu));
            if i % 2 == 1 {
                out.push(self.dropouts[i / 2].info());
            }
        }
        out.push(self.head.info());
        out.push(LayerInfo::new("score.mean", LayerKind::GlobalMean));
        out.push(LayerInfo::new("score.sigmoid", LayerKind::Sigmoid));
        out
    }
}
