use candle_core::Tensor;

use crate::{Error, Result};

/// Clamp applied to scores inside the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

fn check_same_shape(real: &Tensor, fake: &Tensor) -> Result<()> {
    if real.dims() != fake.dims() {
        return Err(Error::Contract(format!("feature shapes differ: {:?} vs {:?}", real.dims(), fake.dims())));
    }
    if real.rank() == 0 {
        return Err(Error::Contract("features need a batch axis".into()));
    }
    Ok(())
}

/// `|| mean_b real - mean_b fake ||^2` over `(batch, ...)` feature tensors.
pub fn feature_matching_loss(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    check_same_shape(real, fake)?;
    let diff = (real.mean(0)? - fake.mean(0)?)?;
    Ok(diff.sqr()?.sum_all()?)
}

/// Scalar version over flattened `(batch, dim)` rows in `f64`.
pub fn feature_matching_value(real: &[f64], fake: &[f64], batch: usize) -> Result<f64> {
    let diff = mean_difference(real, fake, batch)?;
    Ok(diff.iter().map(|d| d * d).sum())
}

/// Gradient of [`feature_matching_value`] with respect to each fake
/// element: `-2 (mean real - mean fake) / batch`.
pub fn feature_matching_grad(real: &[f64], fake: &[f64], batch: usize) -> Result<Vec<f64>> {
    let diff = mean_difference(real, fake, batch)?;
    let dim = diff.len();
    Ok((0..fake.len()).map(|i| -2.0 * diff[i % dim] / batch as f64).collect())
}

fn mean_difference(real: &[f64], fake: &[f64], batch: usize) -> Result<Vec<f64>> {
    if real.len() != fake.len() || batch == 0 || real.len() % batch != 0 {
        return Err(Error::Contract(format!(
            "feature lengths {} and {} do not form {batch} equal rows",
            real.len(),
            fake.len()
        )));
    }
    let dim = real.len() / batch;
    let mut diff = vec![0.0; dim];
    for (i, (r, f)) in real.iter().zip(fake).enumerate() {
        diff[i % dim] += (r - f) / batch as f64;
    }
    Ok(diff)
}

/// `mean(-ln real) + mean(-ln(1 - fake))`, scores clamped to
/// `[BCE_EPS, 1 - BCE_EPS]`.
pub fn discriminator_bce_loss(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    let r = real.clamp(BCE_EPS, 1.0 - BCE_EPS)?;
    let f = fake.clamp(BCE_EPS, 1.0 - BCE_EPS)?;
    let real_term = r.log()?.mean_all()?.neg()?;
    let fake_term = f.affine(-1.0, 1.0)?.log()?.mean_all()?.neg()?;
    Ok((real_term + fake_term)?)
}

pub fn discriminator_bce_value(real: &[f64], fake: &[f64]) -> f64 {
    let c = |s: f64| s.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&s| f(c(s))).sum::<f64>() / v.len().max(1) as f64;
    mean(real, &|s| -s.ln()) + mean(fake, &|s| -(1.0 - s).ln())
}
