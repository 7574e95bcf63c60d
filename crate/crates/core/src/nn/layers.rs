use candle_core::{Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::nn::{ops, Mode, ParamStore, DEVICE};
use crate::Result;

/// Layer kinds that appear in a network's inventory. There is no
/// fully-connected kind: every network in the crate is convolutional.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LayerKind {
    Conv2d { in_channels: usize, out_channels: usize, kernel: (usize, usize), stride: usize },
    BatchNorm2d { channels: usize },
    SpatiallyAdaptiveNorm { channels: usize },
    Selu,
    LeakyRelu,
    AlphaDropout { rate: f64 },
    Upsample { factor: usize },
    AvgPool { factor: usize },
    Softmax,
    Sigmoid,
    Tanh,
    GlobalMean,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerInfo {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerInfo {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self { name: name.into(), kind }
    }
}

#[derive(Debug, Clone)]
pub struct Conv2d {
    pub name: String,
    pub weight: Var,
    pub bias: Option<Var>,
    pub stride: usize,
    pub padding: usize,
}

impl Conv2d {
    /// LeCun-normal weights (std = 1/sqrt(fan_in)), zero bias.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        bias: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel.0 * kernel.1;
        let weight = store.normal(
            &format!("{name}.weight"),
            &[out_channels, in_channels, kernel.0, kernel.1],
            (1.0 / fan_in as f64).sqrt(),
            rng,
        )?;
        let bias = if bias { Some(store.constant(&format!("{name}.bias"), &[out_channels], 0.0)?) } else { None };
        Ok(Self { name: name.to_string(), weight, bias, stride, padding })
    }

    /// Sets every bias entry; used to start scale heads at one.
    pub fn fill_bias(&self, value: f64) -> Result<()> {
        if let Some(b) = &self.bias {
            b.set(&(Tensor::ones(b.dims(), b.dtype(), &DEVICE)? * value)?)?;
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let y = x.conv2d(self.weight.as_tensor(), self.padding, self.stride, 1, 1)?;
        Ok(match &self.bias {
            Some(b) => y.broadcast_add(&b.as_tensor().reshape((1, (), 1, 1))?)?,
            None => y,
        })
    }

    pub fn info(&self) -> LayerInfo {
        let (o, i, kh, kw) = self.weight.dims4().expect("conv weight is 4-d");
        LayerInfo::new(
            self.name.clone(),
            LayerKind::Conv2d { in_channels: i, out_channels: o, kernel: (kh, kw), stride: self.stride },
        )
    }

    pub fn out_size(&self, size: usize) -> usize {
        let k = self.weight.dims()[2];
        (size + 2 * self.padding - k) / self.stride + 1
    }
}

/// Batch normalization over (batch, height, width) with learned affine
/// parameters and running statistics for evaluation.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub name: String,
    gamma: Var,
    beta: Var,
    running_mean: Var,
    running_var: Var,
    momentum: f64,
    eps: f64,
}

impl BatchNorm2d {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Result<Self> {
        Ok(Self {
            name: name.to_string(),
            gamma: store.constant(&format!("{name}.gamma"), &[channels], 1.0)?,
            beta: store.constant(&format!("{name}.beta"), &[channels], 0.0)?,
            running_mean: store.buffer(&format!("{name}.running_mean"), &[channels], 0.0)?,
            running_var: store.buffer(&format!("{name}.running_var"), &[channels], 1.0)?,
            momentum: 0.1,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor, mode: &Mode) -> Result<Tensor> {
        let (n, c, h, w) = x.dims4()?;
        let (mean, var) = if mode.is_train() {
            let mean = x.mean_keepdim((0, 2, 3))?;
            let centered = x.broadcast_sub(&mean)?;
            let var = centered.sqr()?.mean_keepdim((0, 2, 3))?;
            let count = (n * h * w) as f64;
            let unbiased = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
            let m = self.momentum;
            let rm = (self.running_mean.as_tensor() * (1.0 - m))?.add(&(mean.detach().flatten_all()? * m)?)?;
            let rv =
                (self.running_var.as_tensor() * (1.0 - m))?.add(&(var.detach().flatten_all()? * (m * unbiased))?)?;
            self.running_mean.set(&rm)?;
            self.running_var.set(&rv)?;
            (mean, var)
        } else {
            (self.running_mean.as_tensor().reshape((1, c, 1, 1))?, self.running_var.as_tensor().reshape((1, c, 1, 1))?)
        };
        let normed = x.broadcast_sub(&mean)?.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        Ok(normed
            .broadcast_mul(&self.gamma.as_tensor().reshape((1, c, 1, 1))?)?
            .broadcast_add(&self.beta.as_tensor().reshape((1, c, 1, 1))?)?)
    }

    pub fn info(&self) -> LayerInfo {
        LayerInfo::new(self.name.clone(), LayerKind::BatchNorm2d { channels: self.gamma.dims()[0] })
    }
}

/// Dropout that keeps the mean and variance of SELU activations: dropped
/// units are set to the SELU negative saturation value and the result is
/// re-standardized with an affine correction.
#[derive(Debug, Clone)]
pub struct AlphaDropout {
    pub name: String,
    pub rate: f64,
}

impl AlphaDropout {
    pub fn new(name: &str, rate: f64) -> Self {
        Self { name: name.to_string(), rate }
    }

    pub fn forward(&self, x: &Tensor, mode: &mut Mode) -> Result<Tensor> {
        let rng = match mode {
            Mode::Train(rng) if self.rate > 0.0 => rng,
            _ => return Ok(x.clone()),
        };
        let keep = 1.0 - self.rate;
        let alpha_p = -ops::SELU_ALPHA * ops::SELU_SCALE;
        let a = (keep + alpha_p * alpha_p * keep * self.rate).powf(-0.5);
        let b = -a * alpha_p * self.rate;
        let mask: Vec<f32> = (0..x.elem_count()).map(|_| f32::from(u8::from(rng.gen_bool(keep)))).collect();
        let mask = Tensor::from_vec(mask, x.dims(), &DEVICE)?;
        // a * (x * m + alpha_p * (1 - m)) + b
        let dropped = mask.affine(-alpha_p, alpha_p)?;
        Ok((x * &mask)?.add(&dropped)?.affine(a, b)?)
    }

    pub fn info(&self) -> LayerInfo {
        LayerInfo::new(self.name.clone(), LayerKind::AlphaDropout { rate: self.rate })
    }
}
