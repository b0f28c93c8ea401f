use crate::error::{Error, Result};
use crate::rng::Stream;

use super::tensor::Tensor;

/// Uniform draws on `[-b, b]` with `b = sqrt(6 / fan_in)`.
///
/// Each value consumes one 32-bit word: its top 24 bits give `u` in
/// `[0, 1)` and the value is `(2u - 1) * b`, clamped to the largest `f32`
/// not above `b`.
pub fn he_uniform_init(fan_in: usize, shape: &[usize], seed: u64) -> Result<Tensor> {
    if fan_in == 0 {
        return Err(Error::InvalidLayer {
            layer: "he_uniform".into(),
            reason: "fan_in must be at least 1".into(),
        });
    }
    if shape.is_empty() {
        return Err(Error::InvalidLayer {
            layer: "he_uniform".into(),
            reason: "empty shape".into(),
        });
    }
    let bound = (6.0f64 / fan_in as f64).sqrt();
    let mut bound32 = bound as f32;
    if f64::from(bound32) > bound {
        bound32 = f32::from_bits(bound32.to_bits() - 1);
    }
    let mut stream = Stream::new(seed);
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let u = f64::from(stream.next_u32() >> 8) / f64::from(1u32 << 24);
            (((2.0 * u - 1.0) * bound) as f32).clamp(-bound32, bound32)
        })
        .collect();
    Tensor::new(shape.to_vec(), data)
}
