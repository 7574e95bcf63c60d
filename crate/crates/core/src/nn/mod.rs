//! Minimal network toolkit over `candle-core` tensors: seeded parameter
//! initialization, the handful of layers the three stages need, Adam, and
//! the versioned checkpoint archive.

mod adam;
pub mod archive;
mod layers;
pub mod ops;
mod store;

pub use adam::{Adam, AdamConfig};
pub use layers::{AlphaDropout, BatchNorm2d, Conv2d, LayerInfo, LayerKind};
pub use store::ParamStore;

use candle_core::{Device, Tensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DEVICE: Device = Device::Cpu;

/// Forward-pass mode. Training passes carry the generator used by
/// stochastic layers; evaluation passes are deterministic.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Standard-normal samples from a seeded generator.
pub fn randn(rng: &mut impl Rng, n: usize) -> Vec<f32> {
    (0..n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect()
}

pub fn tensor(data: Vec<f32>, shape: &[usize]) -> crate::Result<Tensor> {
    Ok(Tensor::from_vec(data, shape, &DEVICE)?)
}

pub fn scalar(t: &Tensor) -> crate::Result<f32> {
    Ok(t.to_dtype(candle_core::DType::F32)?.to_scalar::<f32>()?)
}

pub fn to_vec(t: &Tensor) -> crate::Result<Vec<f32>> {
    Ok(t.flatten_all()?.to_vec1::<f32>()?)
}

/// Optimizer and schedule settings shared by every stage's training loop.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 0.0002, beta1: 0.3, beta2: 0.999, batch_size: 32, epochs: 1, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let bad = |msg: String| Err(crate::Error::Config(msg));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} {b} must lie in [0, 1)"));
            }
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, eps: 1e-8 }
    }
}
