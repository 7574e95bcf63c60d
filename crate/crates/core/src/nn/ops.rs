use candle_core::{Result, Tensor, D};

pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;

pub fn selu(x: &Tensor) -> Result<Tensor> {
    x.elu(SELU_ALPHA)?.affine(SELU_SCALE, 0.0)
}

/// Logistic function written through `tanh` so saturated inputs keep finite
/// gradients.
pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    x.affine(0.5, 0.0)?.tanh()?.affine(0.5, 0.5)
}

pub fn leaky_relu(x: &Tensor, slope: f64) -> Result<Tensor> {
    x.maximum(&x.affine(slope, 0.0)?)
}

/// Softmax over the channel axis of an NCHW tensor.
pub fn softmax_channels(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    let sum = e.sum_keepdim(1)?;
    e.broadcast_div(&sum)
}

/// Integer-factor nearest upsampling of an NCHW tensor, expressed through
/// broadcasting so the backward pass accumulates like any other op.
pub fn upsample_nearest(x: &Tensor, factor: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    x.reshape((n, c, h, 1, w, 1))?.broadcast_as((n, c, h, factor, w, factor))?.contiguous()?.reshape((
        n,
        c,
        h * factor,
        w * factor,
    ))
}

/// Mean over every axis except the first.
pub fn mean_per_sample(x: &Tensor) -> Result<Tensor> {
    let n = x.dim(0)?;
    x.reshape((n, ()))?.mean(D::Minus1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{Device, Var};

    #[test]
    fn selu_matches_scalar_formula() {
        let xs = [-3.0f32, -0.5, 0.0, 0.7, 2.0];
        let t = Tensor::new(&xs, &Device::Cpu).unwrap();
        let out = selu(&t).unwrap().to_vec1::<f32>().unwrap();
        for (x, y) in xs.iter().zip(out) {
            let x = f64::from(*x);
            let expect = if x > 0.0 { SELU_SCALE * x } else { SELU_SCALE * SELU_ALPHA * (x.exp() - 1.0) };
            assert!((f64::from(y) - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn sigmoid_saturates_with_finite_gradient() {
        let v = Var::new(&[-200f32, 0.0, 200.0], &Device::Cpu).unwrap();
        let s = sigmoid(v.as_tensor()).unwrap();
        let vals = s.to_vec1::<f32>().unwrap();
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);
        let g = s.sum_all().unwrap().backward().unwrap();
        let grad = g.get(v.as_tensor()).unwrap().to_vec1::<f32>().unwrap();
        assert!(grad.iter().all(|x| x.is_finite()));
        assert!((grad[1] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn softmax_sums_to_one() {
        let t = Tensor::new(&[[[[1f32, 50.0]], [[2.0, -30.0]], [[0.0, 0.0]]]], &Device::Cpu).unwrap();
        let s = softmax_channels(&t).unwrap();
        let sums = s.sum_keepdim(1).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        for v in sums {
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn upsample_duplicates_and_backprops() {
        let v = Var::new(&[[[[1f32, 2.0], [3.0, 4.0]]]], &Device::Cpu).unwrap();
        let up = upsample_nearest(v.as_tensor(), 2).unwrap();
        assert_eq!(up.dims(), &[1, 1, 4, 4]);
        assert_eq!(
            up.flatten_all().unwrap().to_vec1::<f32>().unwrap(),
            vec![1., 1., 2., 2., 1., 1., 2., 2., 3., 3., 4., 4., 3., 3., 4., 4.]
        );
        // used twice: gradients must accumulate
        let loss = (up.sum_all().unwrap() + v.as_tensor().sum_all().unwrap()).unwrap();
        let g = loss.backward().unwrap();
        let grad = g.get(v.as_tensor()).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
        assert_eq!(grad, vec![5.0; 4]);
    }
}
