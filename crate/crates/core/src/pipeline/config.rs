use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataflow::{VocabMode, FEATURE_WIDTH, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::lstm::{ClassifierSpec, LstmConfig};
use crate::metrics::AverageKind;
use crate::numerics::AdamConfig;
use crate::sae::SaeConfig;

/// Environment variable that replaces `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "SAELSTM_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub split: u64,
    pub sae: u64,
    pub lstm: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::all(42)
    }
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            split: seed,
            sae: seed,
            lstm: seed,
        }
    }
}

/// Everything a pipeline run depends on. The `seed` fields inside `sae` and
/// `lstm` are replaced by `seeds` when the run starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub data_path: PathBuf,
    /// Built-in UGRansome schema when absent.
    pub schema_path: Option<PathBuf>,
    /// Fraction of each class held out for testing.
    pub split_fraction: f64,
    pub seeds: Seeds,
    pub sae: SaeConfig,
    pub lstm: LstmConfig,
    pub classifier: ClassifierSpec,
    pub output_dir: PathBuf,
    pub vocab_mode: VocabMode,
    pub drop_duplicates: bool,
    /// Average shown in the human-readable report table.
    pub average: AverageKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            data_path: PathBuf::new(),
            schema_path: None,
            split_fraction: 0.2,
            seeds: Seeds::default(),
            sae: SaeConfig::default(),
            lstm: LstmConfig::default(),
            classifier: ClassifierSpec::default(),
            output_dir: PathBuf::from("saelstm-out"),
            vocab_mode: VocabMode::Lenient,
            drop_duplicates: false,
            average: AverageKind::Weighted,
        }
    }
}

fn check_adam(stage: &str, a: &AdamConfig) -> Result<()> {
    let ok = a.lr.is_finite()
        && a.lr > 0.0
        && (0.0..1.0).contains(&a.beta1)
        && (0.0..1.0).contains(&a.beta2)
        && a.epsilon.is_finite()
        && a.epsilon > 0.0;
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("{stage}: invalid optimizer settings {a:?}")))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&s)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Replaces `output_dir` with `$SAELSTM_OUTPUT_DIR` when it is set.
    pub fn apply_env_overrides(&mut self) {
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV).filter(|d| !d.is_empty()) {
            self.output_dir = PathBuf::from(dir);
        }
    }

    /// Checks ranges and that the input files exist. Nothing is written.
    pub fn validate(&self) -> Result<()> {
        self.validate_settings()?;
        if !self.data_path.is_file() {
            return Err(Error::Config(format!(
                "data file {} does not exist",
                self.data_path.display()
            )));
        }
        if let Some(p) = &self.schema_path {
            if !p.is_file() {
                return Err(Error::Config(format!("schema file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// The checks of [`PipelineConfig::validate`] that do not touch the filesystem.
    pub fn validate_settings(&self) -> Result<()> {
        let f = self.split_fraction;
        if !(f.is_finite() && f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("split fraction {f} must lie in (0, 1)")));
        }
        if self.sae.batch_size == 0 || self.lstm.batch_size == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        check_adam("sae", &self.sae.adam)?;
        check_adam("lstm", &self.lstm.adam)?;
        if let Some(c) = self.lstm.clip_norm {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("clip norm {c} must be positive")));
            }
        }
        let c = &self.classifier;
        if c.input_dim != FEATURE_WIDTH {
            return Err(Error::Config(format!(
                "classifier input width {} must equal the encoder width {FEATURE_WIDTH}",
                c.input_dim
            )));
        }
        if c.classes != NUM_CLASSES {
            return Err(Error::Config(format!(
                "classifier must have {NUM_CLASSES} classes, got {}",
                c.classes
            )));
        }
        if c.units == 0 || c.layers == 0 || c.seq_len == 0 {
            return Err(Error::Config(format!("classifier dimensions must be positive: {c:?}")));
        }
        Ok(())
    }

    /// SAE settings with the run seed applied.
    pub fn sae_config(&self) -> SaeConfig {
        SaeConfig {
            seed: self.seeds.sae,
            ..self.sae
        }
    }

    /// LSTM settings with the run seed applied.
    pub fn lstm_config(&self) -> LstmConfig {
        LstmConfig {
            seed: self.seeds.lstm,
            ..self.lstm
        }
    }

    /// Hex SHA-256 of the config JSON with `output_dir` blanked, so moving
    /// the outputs does not change the identity of a run.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_hyperparameters() {
        let c = PipelineConfig::default();
        assert_eq!(c.sae.epochs, 50);
        assert_eq!(c.lstm.epochs, 400);
        assert_eq!(c.classifier.units, 168);
        assert_eq!(c.split_fraction, 0.2);
        assert!(c.validate_settings().is_ok());
    }

    #[test]
    fn bad_fraction_is_config_error() {
        for f in [0.0, 1.0, 1.5, -0.1, f64::NAN] {
            let c = PipelineConfig {
                split_fraction: f,
                ..Default::default()
            };
            let e = c.validate_settings().unwrap_err();
            assert_eq!(e.exit_code(), 2, "{f}");
        }
    }

    #[test]
    fn missing_data_file_is_config_error() {
        let c = PipelineConfig {
            data_path: "/definitely/not/here.csv".into(),
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn classifier_width_must_match_encoder() {
        let mut c = PipelineConfig::default();
        c.classifier.input_dim = 12;
        assert!(matches!(c.validate_settings(), Err(Error::Config(_))));
    }

    #[test]
    fn json_round_trip_and_partial_files() {
        let c = PipelineConfig::default();
        let back: PipelineConfig = serde_json::from_str(&c.to_json_pretty()).unwrap();
        assert_eq!(back, c);
        let partial: PipelineConfig =
            serde_json::from_str(r#"{"data_path": "x.csv", "sae": {"epochs": 5}}"#).unwrap();
        assert_eq!(partial.sae.epochs, 5);
        assert_eq!(partial.sae.batch_size, 32);
        assert_eq!(partial.lstm.epochs, 400);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"split": 0.3}"#).is_err());
        let lr: PipelineConfig = serde_json::from_str(r#"{"lstm": {"adam": {"lr": 0.01}}}"#).unwrap();
        assert_eq!((lr.lstm.adam.lr, lr.lstm.adam.beta1), (0.01, 0.9));
    }

    #[test]
    fn fingerprint_ignores_output_dir() {
        let a = PipelineConfig::default();
        let b = PipelineConfig {
            output_dir: "elsewhere".into(),
            ..Default::default()
        };
        let c = PipelineConfig {
            seeds: Seeds::all(1),
            ..Default::default()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn run_seeds_override_stage_seeds() {
        let c = PipelineConfig {
            seeds: Seeds {
                split: 1,
                sae: 2,
                lstm: 3,
            },
            ..Default::default()
        };
        assert_eq!(c.sae_config().seed, 2);
        assert_eq!(c.lstm_config().seed, 3);
    }
}
