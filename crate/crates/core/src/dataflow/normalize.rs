use serde::{Deserialize, Serialize};

use crate::numerics::Matrix;

/// Per-column `(min, max)` observed on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl NormStats {
    pub fn fit(table: &Matrix) -> Self {
        let (rows, cols) = table.shape();
        let mut min = vec![f64::INFINITY; cols];
        let mut max = vec![f64::NEG_INFINITY; cols];
        for r in 0..rows {
            for (j, &x) in table.row(r).iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        if rows == 0 {
            min.fill(0.0);
            max.fill(0.0);
        }
        NormStats { min, max }
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    /// Maps `x` to `(x - min)/(max - min)`; constant columns map to 0.
    #[inline]
    pub fn scale(&self, j: usize, x: f64) -> f64 {
        let range = self.max[j] - self.min[j];
        if range > 0.0 {
            (x - self.min[j]) / range
        } else {
            0.0
        }
    }

    /// Scales and clips to `[0, 1]`.
    pub fn apply(&self, table: &Matrix) -> Matrix {
        let mut out = table.clone();
        for r in 0..out.rows() {
            for (j, x) in out.row_mut(r).iter_mut().enumerate() {
                *x = self.scale(j, *x).clamp(0.0, 1.0);
            }
        }
        out
    }
}

/// Min-max scaling. Without `stats`, fits them on `table` (training path);
/// with `stats`, applies them and clips to `[0, 1]` (inference path).
pub fn minmax_normalize(table: &Matrix, stats: Option<&NormStats>) -> (Matrix, NormStats) {
    match stats {
        Some(s) => (s.apply(table), s.clone()),
        None => {
            let s = NormStats::fit(table);
            let mut out = table.clone();
            for r in 0..out.rows() {
                for (j, x) in out.row_mut(r).iter_mut().enumerate() {
                    *x = s.scale(j, *x);
                }
            }
            (out, s)
        }
    }
}
