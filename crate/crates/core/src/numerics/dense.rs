use rand::Rng;

use super::{glorot_uniform_with, Activation, Matrix};
use crate::error::{Error, Result};

/// Affine layer followed by an activation: `y = act(W x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `fan_out × fan_in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

/// Gradients of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl DenseGrads {
    pub fn zeros_like(layer: &DenseLayer) -> Self {
        DenseGrads {
            weights: Matrix::zeros(layer.fan_out(), layer.fan_in()),
            bias: vec![0.0; layer.fan_out()],
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.as_mut_slice().iter_mut().for_each(|v| *v *= s);
        self.bias.iter_mut().for_each(|v| *v *= s);
    }
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::shape("DenseLayer::new", weights.rows(), bias.len()));
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        fan_in: usize,
        fan_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        DenseLayer {
            weights: glorot_uniform_with(fan_in, fan_out, rng),
            bias: vec![0.0; fan_out],
            activation,
        }
    }

    #[inline]
    pub fn fan_in(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn fan_out(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        self.fan_out() * self.fan_in() + self.fan_out()
    }

    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.weights.matvec_into(x, out);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        self.activation.apply_in_place(out);
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.fan_in() {
            return Err(Error::shape("dense_forward", self.fan_in(), x.len()));
        }
        let mut out = vec![0.0; self.fan_out()];
        self.forward_into(x, &mut out);
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    ///
    /// `y` is this layer's forward output for input `x`; `upstream` holds
    /// `dL/dy` and is overwritten with `dL/dz`.
    pub(crate) fn backward_acc(
        &self,
        x: &[f64],
        y: &[f64],
        upstream: &mut [f64],
        grads: &mut DenseGrads,
        want_grad_x: bool,
    ) -> Option<Vec<f64>> {
        self.activation.backprop_in_place(y, upstream);
        grads.weights.add_outer(upstream, x);
        for (gb, d) in grads.bias.iter_mut().zip(upstream.iter()) {
            *gb += d;
        }
        want_grad_x.then(|| {
            let mut gx = vec![0.0; self.fan_in()];
            self.weights.matvec_t_acc(upstream, &mut gx);
            gx
        })
    }

    /// Exact gradients of `upstream · act(Wx + b)` with respect to `x`, `W` and `b`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, DenseGrads)> {
        if upstream.len() != self.fan_out() {
            return Err(Error::shape("dense_backward", self.fan_out(), upstream.len()));
        }
        let y = self.forward(x)?;
        let mut grads = DenseGrads::zeros_like(self);
        let mut up = upstream.to_vec();
        let gx = self
            .backward_acc(x, &y, &mut up, &mut grads, true)
            .expect("requested grad_x");
        Ok((gx, grads))
    }
}
