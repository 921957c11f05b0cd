use std::path::{Path, PathBuf};

use log::info;

use super::bundle::{load_classifier, load_sae, save_classifier, save_sae, ModelBundle};
use super::config::PipelineConfig;
use super::stages::{
    encode_examples, evaluate_normalized, evaluate_only, preprocess, pretrain_sae, train_lstm,
    write_json, write_report, Artifacts, Manifest, PipelineReport, Preprocessed, Timings,
};
use crate::dataflow::ExampleTable;
use crate::error::{Error, Result};
use crate::history::TrainHistory;
use crate::metrics::MetricsReport;

/// A directory holding the intermediate files of the staged workflow:
/// `preprocess → train-sae → encode → train-lstm → evaluate`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Workspace {
    pub dir: PathBuf,
}

impl Workspace {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Workspace { dir: dir.into() }
    }

    pub fn artifacts(&self) -> Artifacts {
        Artifacts::in_dir(&self.dir)
    }

    pub fn train_csv(&self) -> PathBuf {
        self.dir.join("train.csv")
    }

    pub fn test_csv(&self) -> PathBuf {
        self.dir.join("test.csv")
    }

    pub fn train_latent_csv(&self) -> PathBuf {
        self.dir.join("train_latent.csv")
    }

    pub fn test_latent_csv(&self) -> PathBuf {
        self.dir.join("test_latent.csv")
    }

    pub fn sae_path(&self) -> PathBuf {
        self.dir.join("sae.bin")
    }

    pub fn classifier_path(&self) -> PathBuf {
        self.dir.join("classifier.bin")
    }

    fn ensure_dir(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    fn read_table(path: &Path) -> Result<ExampleTable> {
        if !path.is_file() {
            return Err(Error::Config(format!(
                "{} not found; run the earlier stage first",
                path.display()
            )));
        }
        Ok(ExampleTable::read_csv(path)?.0)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let p = self.artifacts().manifest;
        if !p.is_file() {
            return Err(Error::Config(format!("{} not found; run preprocess first", p.display())));
        }
        Manifest::load(&p)
    }

    /// Writes `manifest.json`, `train.csv` and `test.csv`.
    pub fn preprocess(&self, cfg: &PipelineConfig) -> Result<Preprocessed> {
        cfg.validate()?;
        let pre = preprocess(cfg).map_err(|e| e.in_stage("preprocess"))?;
        self.ensure_dir()?;
        pre.manifest.save(&self.artifacts().manifest)?;
        let names = &pre.manifest.feature_names;
        pre.train.write_csv(&self.train_csv(), names)?;
        pre.test.write_csv(&self.test_csv(), names)?;
        Ok(pre)
    }

    /// Trains the SAE on `train.csv`; writes `sae.bin` and `sae_history.json`.
    pub fn train_sae(&self, cfg: &PipelineConfig) -> Result<TrainHistory> {
        cfg.validate_settings()?;
        let train = Self::read_table(&self.train_csv())?;
        let (sae, history) = pretrain_sae(cfg, &train).map_err(|e| e.in_stage("sae"))?;
        save_sae(&sae, &self.sae_path())?;
        write_json(&self.artifacts().sae_history, &history.without_timings())?;
        Ok(history)
    }

    /// Writes latent codes for both splits.
    pub fn encode(&self) -> Result<()> {
        let sae = load_sae(&self.sae_path())?;
        let names: Vec<String> = (0..sae.latent_width()).map(|i| format!("z{i}")).collect();
        for (src, dst) in [
            (self.train_csv(), self.train_latent_csv()),
            (self.test_csv(), self.test_latent_csv()),
        ] {
            let table = Self::read_table(&src)?;
            encode_examples(&sae, &table)
                .map_err(|e| e.in_stage("encode"))?
                .write_csv(&dst, &names)?;
        }
        Ok(())
    }

    /// Trains the classifier and assembles `model.bundle`. With fine-tuning
    /// the encoder is trained too and `sae.bin` is rewritten.
    pub fn train_lstm(&self, cfg: &PipelineConfig) -> Result<TrainHistory> {
        cfg.validate_settings()?;
        let manifest = self.manifest()?;
        let mut sae = load_sae(&self.sae_path())?;
        let (clf, history) = if cfg.lstm.fine_tune_encoder {
            let train = Self::read_table(&self.train_csv())?;
            let out = train_lstm(cfg, &train, Some(&mut sae)).map_err(|e| e.in_stage("lstm"))?;
            save_sae(&sae, &self.sae_path())?;
            out
        } else {
            let latent = Self::read_table(&self.train_latent_csv())?;
            train_lstm(cfg, &latent, None).map_err(|e| e.in_stage("lstm"))?
        };
        save_classifier(&clf, &self.classifier_path())?;
        write_json(&self.artifacts().lstm_history, &history.without_timings())?;
        let bundle = ModelBundle::new(
            manifest.schema,
            manifest.vocab,
            manifest.vocab_mode,
            manifest.stats,
            sae,
            load_classifier(&self.classifier_path())?,
            manifest.config_fingerprint,
        )?;
        bundle.save(&self.artifacts().bundle)?;
        info!("bundle written to {}", self.artifacts().bundle.display());
        Ok(history)
    }

    /// Evaluates a bundle on a raw CSV, or on `test.csv` when `data` is
    /// `None`, and writes the report files into the workspace.
    pub fn evaluate(
        &self,
        cfg: &PipelineConfig,
        bundle_path: Option<&Path>,
        data: Option<&Path>,
    ) -> Result<(PipelineReport, MetricsReport)> {
        let default_bundle = self.artifacts().bundle;
        let bundle = ModelBundle::load(bundle_path.unwrap_or(&default_bundle))?;
        let metrics = match data {
            Some(p) => evaluate_only(&bundle, p)?,
            None => evaluate_normalized(&bundle, &Self::read_table(&self.test_csv())?)
                .map_err(|e| e.in_stage("evaluate"))?,
        };
        let report = PipelineReport::new(&metrics, None, bundle.config_fingerprint.clone(), Timings::now());
        self.ensure_dir()?;
        write_report(&self.artifacts(), &report, &metrics, cfg.average)?;
        Ok((report, metrics))
    }
}
