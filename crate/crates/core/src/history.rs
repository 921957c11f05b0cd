use serde::{Deserialize, Serialize};

/// Per-epoch training record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epoch_loss: Vec<f64>,
    /// Running training accuracy per epoch, each batch scored before its
    /// update; empty for unsupervised training.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epoch_accuracy: Vec<f64>,
    /// Wall-clock seconds per epoch. Not deterministic, so excluded from equality checks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub epoch_seconds: Vec<f64>,
}

impl TrainHistory {
    pub fn epochs_completed(&self) -> usize {
        self.epoch_loss.len()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }

    /// Trailing moving average of the loss with the given window.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        if window == 0 || self.epoch_loss.len() < window {
            return Vec::new();
        }
        self.epoch_loss
            .windows(window)
            .map(|w| w.iter().sum::<f64>() / window as f64)
            .collect()
    }

    pub(crate) fn push(&mut self, loss: f64, accuracy: Option<f64>, seconds: f64) {
        self.epoch_loss.push(loss);
        if let Some(a) = accuracy {
            self.epoch_accuracy.push(a);
        }
        self.epoch_seconds.push(seconds);
    }

    pub(crate) fn extend(&mut self, other: TrainHistory) {
        self.epoch_loss.extend(other.epoch_loss);
        self.epoch_accuracy.extend(other.epoch_accuracy);
        self.epoch_seconds.extend(other.epoch_seconds);
    }

    /// The history without timings, for reproducibility comparisons.
    pub fn without_timings(&self) -> TrainHistory {
        TrainHistory {
            epoch_seconds: Vec::new(),
            ..self.clone()
        }
    }
}
