//! Dense linear algebra, activations, losses, initialization, Adam, and
//! parameter accounting. Everything here is `f64` and deterministic given
//! explicit seeds.

mod activation;
mod adam;
mod dense;
pub mod gradcheck;
mod init;
mod loss;
mod matrix;
mod params;

pub use activation::{
    apply_activation, relu, relu_derivative, sigmoid, softmax, softmax_in_place, Activation,
};
pub use adam::{adam_step, clip_global_norm, global_norm, Adam, AdamConfig, AdamState};
pub use dense::{DenseGrads, DenseLayer};
pub use init::{glorot_limit, glorot_uniform_init, glorot_uniform_with};
pub use loss::{mse_loss, sparse_cce_loss, PROB_FLOOR};
pub use matrix::{axpy, dot, sum_squares, Matrix};
pub use params::{count_params, LayerSpec};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
