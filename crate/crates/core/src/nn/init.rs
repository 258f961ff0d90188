use rand::Rng;
use rand_distr::StandardNormal;

use super::tensor::Tensor;

/// Uniform in `±1/√fan_in`.
pub fn uniform_fan_in<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let a = 1.0 / (fan_in.max(1) as f64).sqrt();
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-a..a)).collect();
    Tensor::new(shape, data).expect("sized from shape")
}

/// Standard normal scaled by `scale`.
pub fn normal<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    Tensor::new(shape, data).expect("sized from shape")
}
