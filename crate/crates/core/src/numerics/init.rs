use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Matrix;

/// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// `fan_out × fan_in` matrix drawn uniformly from `[-L, L]`.
pub fn glorot_uniform_init(fan_in: usize, fan_out: usize, rng_seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    glorot_uniform_with(fan_in, fan_out, &mut rng)
}

pub fn glorot_uniform_with<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = glorot_limit(fan_in, fan_out);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..=limit))
        .collect();
    Matrix::from_vec(fan_out, fan_in, data).expect("length matches by construction")
}
