use rand::Rng;
use rand_distr::StandardNormal;

use super::tensor::Tensor;

/// Xavier/Glorot uniform: i.i.d. on `[-b, b]` with `b = sqrt(6/(fan_in+fan_out))`.
/// Returned shape is `fan_in x fan_out`.
pub fn xavier_uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    assert!(fan_in > 0 && fan_out > 0, "fans must be positive");
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect();
    Tensor::new(fan_in, fan_out, data)
}

/// The Xavier uniform bound for a given fan pair.
pub fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// I.i.d. normal entries with the given standard deviation.
pub fn normal(rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * std
        })
        .collect();
    Tensor::new(rows, cols, data)
}
