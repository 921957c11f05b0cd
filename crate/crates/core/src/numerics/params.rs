use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSpec {
    Dense { fan_in: usize, fan_out: usize },
    Lstm { input_dim: usize, units: usize },
}

impl LayerSpec {
    pub fn param_count(self) -> usize {
        match self {
            LayerSpec::Dense { fan_in, fan_out } => fan_out * fan_in + fan_out,
            LayerSpec::Lstm { input_dim, units } => 4 * (units * (input_dim + units) + units),
        }
    }
}

/// Per-layer and total trainable parameter counts.
pub fn count_params(layers: &[LayerSpec]) -> (Vec<usize>, usize) {
    let per: Vec<usize> = layers.iter().map(|l| l.param_count()).collect();
    let total = per.iter().sum();
    (per, total)
}
