use std::collections::BTreeMap;

use candle_core::{DType, Tensor, Var};
use rand_chacha::ChaCha8Rng;

use crate::nn::{randn, DEVICE};
use crate::{Error, Result};

/// Named trainable parameters and non-trainable buffers of one network.
/// Names are unique and iteration order is lexicographic, which fixes the
/// optimizer and archive order.
#[derive(Debug, Default, Clone)]
pub struct ParamStore {
    params: BTreeMap<String, Var>,
    buffers: BTreeMap<String, Var>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(map: &mut BTreeMap<String, Var>, name: &str, var: Var) -> Var {
        assert!(map.insert(name.to_string(), var.clone()).is_none(), "duplicate parameter {name}");
        var
    }

    /// Normal(0, std) initialized parameter.
    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64, rng: &mut ChaCha8Rng) -> Result<Var> {
        let n = shape.iter().product();
        let data: Vec<f32> = randn(rng, n).into_iter().map(|v| v * std as f32).collect();
        let var = Var::from_vec(data, shape, &DEVICE)?;
        Ok(Self::insert(&mut self.params, name, var))
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Var> {
        let var = Var::from_tensor(&(Tensor::ones(shape, DType::F32, &DEVICE)? * value)?)?;
        Ok(Self::insert(&mut self.params, name, var))
    }

    pub fn buffer(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Var> {
        let var = Var::from_tensor(&(Tensor::ones(shape, DType::F32, &DEVICE)? * value)?)?;
        Ok(Self::insert(&mut self.buffers, name, var))
    }

    pub fn params(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.params.iter()
    }

    pub fn param(&self, name: &str) -> Option<&Var> {
        self.params.get(name)
    }

    pub fn num_params(&self) -> usize {
        self.params.values().map(|v| v.elem_count()).sum()
    }

    /// Every parameter and buffer as `param.<name>` / `buffer.<name>`.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let p = self.params.iter().map(|(n, v)| (format!("param.{n}"), v.as_detached_tensor()));
        let b = self.buffers.iter().map(|(n, v)| (format!("buffer.{n}"), v.as_detached_tensor()));
        p.chain(b).collect()
    }

    /// Overwrites every parameter and buffer from a name-to-tensor table as
    /// produced by [`ParamStore::named_tensors`].
    pub fn load(&self, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        let all = self
            .params
            .iter()
            .map(|(n, v)| (format!("param.{n}"), v))
            .chain(self.buffers.iter().map(|(n, v)| (format!("buffer.{n}"), v)));
        for (name, var) in all {
            let t = tensors.get(&name).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if t.dims() != var.dims() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(t)?;
        }
        Ok(())
    }
}
