//! Weight initialization.

use crate::tensor::NdArray;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Uniform init with bounds `±sqrt(6 / (fan_in + fan_out))`.
///
/// Fans are counted over the kernel receptive field times channels.
pub fn glorot_uniform(
    shape: Vec<usize>,
    fan_in: usize,
    fan_out: usize,
    rng: &mut ChaCha8Rng,
) -> NdArray {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-bound..bound)).collect();
    NdArray::new(shape, data).expect("init shape")
}
