use candle_core::Tensor;

use crate::pixsynth::ScaleOutput;
use crate::Result;

/// `mean(relu(1 - real)) + mean(relu(1 + fake))` for one scale.
pub fn discriminator_hinge_loss(real: &Tensor, fake: &Tensor) -> Result<Tensor> {
    let r = real.affine(-1.0, 1.0)?.relu()?.mean_all()?;
    let f = fake.affine(1.0, 1.0)?.relu()?.mean_all()?;
    Ok((r + f)?)
}

/// `-mean(fake)` for one scale.
pub fn generator_hinge_loss(fake: &Tensor) -> Result<Tensor> {
    Ok(fake.mean_all()?.neg()?)
}

pub fn discriminator_hinge_value(real: &[f64], fake: &[f64]) -> f64 {
    let mean = |v: &[f64], f: &dyn Fn(f64) -> f64| v.iter().map(|&s| f(s)).sum::<f64>() / v.len().max(1) as f64;
    mean(real, &|s| (1.0 - s).max(0.0)) + mean(fake, &|s| (1.0 + s).max(0.0))
}

/// Gradients of [`discriminator_hinge_value`] with respect to the real and
/// fake scores (zero on the flat side of each hinge).
pub fn discriminator_hinge_grad(real: &[f64], fake: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nr = real.len().max(1) as f64;
    let nf = fake.len().max(1) as f64;
    (
        real.iter().map(|&s| if s < 1.0 { -1.0 / nr } else { 0.0 }).collect(),
        fake.iter().map(|&s| if s > -1.0 { 1.0 / nf } else { 0.0 }).collect(),
    )
}

pub fn generator_hinge_value(fake: &[f64]) -> f64 {
    -fake.iter().sum::<f64>() / fake.len().max(1) as f64
}

pub fn generator_hinge_grad(fake: &[f64]) -> Vec<f64> {
    vec![-1.0 / fake.len().max(1) as f64; fake.len()]
}

/// Sum over scales and layers of the mean absolute difference between
/// real (detached) and fake discriminator features.
pub fn feature_matching_l1(real: &[ScaleOutput], fake: &[ScaleOutput]) -> Result<Tensor> {
    let mut total: Option<Tensor> = None;
    for (r, f) in real.iter().zip(fake) {
        for (rf, ff) in r.features.iter().zip(&f.features) {
            let term = (ff - rf.detach())?.abs()?.mean_all()?;
            total = Some(match total {
                Some(t) => (t + term)?,
                None => term,
            });
        }
    }
    Ok(total.expect("discriminator has features"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor;

    #[test]
    fn saturated_discriminator_has_zero_loss() {
        let real = tensor(vec![1.0, 2.5], &[2]).unwrap();
        let fake = tensor(vec![-1.0, -3.0], &[2]).unwrap();
        assert_eq!(discriminator_hinge_loss(&real, &fake).unwrap().to_scalar::<f32>().unwrap(), 0.0);
        assert_eq!(discriminator_hinge_value(&[1.0, 2.5], &[-1.0, -3.0]), 0.0);
    }

    #[test]
    fn values_match_tensor_versions() {
        let r = [0.3, -0.7, 1.4];
        let f = [0.1, -1.6, 0.9];
        let t = |v: &[f64]| tensor(v.iter().map(|&x| x as f32).collect(), &[v.len()]).unwrap();
        let d = discriminator_hinge_loss(&t(&r), &t(&f)).unwrap().to_scalar::<f32>().unwrap();
        assert!((f64::from(d) - discriminator_hinge_value(&r, &f)).abs() < 1e-6);
        let g = generator_hinge_loss(&t(&f)).unwrap().to_scalar::<f32>().unwrap();
        assert!((f64::from(g) - generator_hinge_value(&f)).abs() < 1e-6);
    }
}
