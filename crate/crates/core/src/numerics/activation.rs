use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
            Activation::Softmax => "softmax",
        }
    }

    /// Applies the activation in place to pre-activations `z`.
    pub fn apply_in_place(self, z: &mut [f64]) {
        match self {
            Activation::Relu => z.iter_mut().for_each(|v| *v = relu(*v)),
            Activation::Sigmoid => z.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Identity => {}
            Activation::Softmax => softmax_in_place(z),
        }
    }

    /// Maps `upstream = dL/dy` to `dL/dz`, given the activation output `y`.
    ///
    /// All elementwise kinds have derivatives expressible through `y`:
    /// relu' = [y > 0], sigmoid' = y(1-y), tanh' = 1-y².
    pub fn backprop_in_place(self, y: &[f64], upstream: &mut [f64]) {
        match self {
            Activation::Relu => {
                for (g, &yi) in upstream.iter_mut().zip(y) {
                    if yi <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for (g, &yi) in upstream.iter_mut().zip(y) {
                    *g *= yi * (1.0 - yi);
                }
            }
            Activation::Tanh => {
                for (g, &yi) in upstream.iter_mut().zip(y) {
                    *g *= 1.0 - yi * yi;
                }
            }
            Activation::Identity => {}
            Activation::Softmax => {
                let s: f64 = upstream.iter().zip(y).map(|(g, p)| g * p).sum();
                for (g, &p) in upstream.iter_mut().zip(y) {
                    *g = p * (*g - s);
                }
            }
        }
    }
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Subgradient choice: the derivative at exactly 0 is 0.
#[inline]
pub fn relu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise activation with its derivative, both evaluated at `x`.
///
/// Only the elementwise kinds are accepted; softmax is not elementwise and
/// returns `None`.
pub fn apply_activation(kind: Activation, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let pair = |f: fn(f64) -> (f64, f64)| -> (Vec<f64>, Vec<f64>) { x.iter().map(|&v| f(v)).unzip() };
    Some(match kind {
        Activation::Relu => pair(|v| (relu(v), relu_derivative(v))),
        Activation::Sigmoid => pair(|v| {
            let s = sigmoid(v);
            (s, s * (1.0 - s))
        }),
        Activation::Tanh => pair(|v| {
            let t = v.tanh();
            (t, 1.0 - t * t)
        }),
        Activation::Identity => pair(|v| (v, 1.0)),
        Activation::Softmax => return None,
    })
}

pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut p = logits.to_vec();
    softmax_in_place(&mut p);
    p
}
