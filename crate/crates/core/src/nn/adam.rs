use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::nn::ParamStore;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

struct Slot {
    name: String,
    var: Var,
    m: Tensor,
    v: Tensor,
}

/// Adam with bias correction, one instance per network.
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    slots: Vec<Slot>,
}

impl Adam {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Result<Self> {
        let slots = store
            .params()
            .map(|(name, var)| {
                Ok(Slot { name: name.clone(), var: var.clone(), m: var.zeros_like()?, v: var.zeros_like()? })
            })
            .collect::<Result<_>>()?;
        Ok(Self { cfg, step: 0, slots })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients of this optimizer's parameters.
    /// Parameters absent from `grads` are left untouched.
    pub fn step(&mut self, grads: &GradStore) -> Result<()> {
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, eps } = self.cfg;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for slot in &mut self.slots {
            let Some(g) = grads.get(slot.var.as_tensor()) else { continue };
            // Moments must not hold on to this step's autograd graph.
            let g = g.detach();
            slot.m = ((&slot.m * beta1)? + (&g * (1.0 - beta1))?)?.detach();
            slot.v = ((&slot.v * beta2)? + (g.sqr()? * (1.0 - beta2))?)?.detach();
            let m_hat = (&slot.m / bc1)?;
            let v_hat = (&slot.v / bc2)?;
            let update = (m_hat / (v_hat.sqrt()? + eps)?)?;
            slot.var.set(&slot.var.as_tensor().sub(&(update * learning_rate)?)?)?;
        }
        Ok(())
    }

    pub fn named_state(&self, prefix: &str) -> Vec<(String, Tensor)> {
        self.slots
            .iter()
            .flat_map(|s| {
                [(format!("{prefix}.m.{}", s.name), s.m.clone()), (format!("{prefix}.v.{}", s.name), s.v.clone())]
            })
            .collect()
    }

    pub fn load_state(&mut self, prefix: &str, step: u64, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        for s in &mut self.slots {
            let get = |kind: &str| {
                tensors
                    .get(&format!("{prefix}.{kind}.{}", s.name))
                    .cloned()
                    .ok_or_else(|| Error::Checkpoint(format!("missing optimizer state {prefix}.{kind}.{}", s.name)))
            };
            s.m = get("m")?;
            s.v = get("v")?;
        }
        self.step = step;
        Ok(())
    }
}
