use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::info;
use serde::{Deserialize, Serialize};

use super::bundle::ModelBundle;
use super::config::{PipelineConfig, Seeds};
use super::container::FORMAT_VERSION;
use crate::dataflow::{
    class_counts, parse_csv, stratified_split_indices, ExampleTable, FeatureSchema, NormStats,
    VocabMap, VocabMode,
};
use crate::error::{Error, Result};
use crate::history::TrainHistory;
use crate::lstm::{build_classifier_with, train_classifier, window_ends, LstmClassifier};
use crate::metrics::{Averages, ClassMetrics, MetricsReport};
use crate::sae::{build_sae, train_sae, SaeModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub parsed: usize,
    pub after_dedup: usize,
    pub train: usize,
    pub test: usize,
}

/// Preprocessing state required to score new records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config_fingerprint: String,
    pub schema: FeatureSchema,
    pub feature_names: Vec<String>,
    pub vocab: VocabMap,
    pub vocab_mode: VocabMode,
    pub stats: NormStats,
    pub split_seed: u64,
    pub split_fraction: f64,
    pub rows: RowCounts,
    pub train_class_counts: Vec<u64>,
    pub test_class_counts: Vec<u64>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub manifest: Manifest,
    /// Normalized training rows.
    pub train: ExampleTable,
    /// Normalized test rows, scaled with the training statistics.
    pub test: ExampleTable,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

pub fn load_schema(cfg: &PipelineConfig) -> Result<FeatureSchema> {
    match &cfg.schema_path {
        Some(p) => FeatureSchema::load(p),
        None => Ok(FeatureSchema::ugransome()),
    }
}

/// Parse, optionally deduplicate, split, then fit vocabularies and scaling on
/// the training part only.
pub fn preprocess(cfg: &PipelineConfig) -> Result<Preprocessed> {
    cfg.validate_settings()?;
    let schema = load_schema(cfg)?;
    let raw = parse_csv(&cfg.data_path, &schema)?;
    let parsed = raw.len();
    let raw = if cfg.drop_duplicates {
        raw.drop_duplicates()
    } else {
        raw
    };
    if raw.is_empty() {
        return Err(Error::Dataset(format!("{} has no records", cfg.data_path.display())));
    }
    let k = schema.class_labels.len();
    let split = stratified_split_indices(&raw.labels, k, cfg.split_fraction, cfg.seeds.split)?;
    let train_raw = raw.select(&split.train);
    let test_raw = raw.select(&split.test);

    let vocab = VocabMap::fit(&train_raw);
    let train_enc = vocab.apply(&train_raw, cfg.vocab_mode)?;
    let test_enc = vocab.apply(&test_raw, cfg.vocab_mode)?;
    let stats = NormStats::fit(&train_enc);
    let train = ExampleTable::new(stats.apply(&train_enc), train_raw.labels)?;
    let test = ExampleTable::new(stats.apply(&test_enc), test_raw.labels)?;

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        config_fingerprint: cfg.fingerprint(),
        feature_names: schema.feature_names(),
        schema,
        vocab,
        vocab_mode: cfg.vocab_mode,
        stats,
        split_seed: cfg.seeds.split,
        split_fraction: cfg.split_fraction,
        rows: RowCounts {
            parsed,
            after_dedup: raw.len(),
            train: train.len(),
            test: test.len(),
        },
        train_class_counts: class_counts(&train.labels, k),
        test_class_counts: class_counts(&test.labels, k),
    };
    info!(
        "preprocess: {} rows ({} train, {} test)",
        raw.len(),
        train.len(),
        test.len()
    );
    Ok(Preprocessed {
        manifest,
        train,
        test,
    })
}

/// Builds the SAE from the run seed and trains it on normalized rows.
pub fn pretrain_sae(cfg: &PipelineConfig, train: &ExampleTable) -> Result<(SaeModel, TrainHistory)> {
    let sae_cfg = cfg.sae_config();
    let mut sae = build_sae(sae_cfg.seed);
    let history = train_sae(&mut sae, &train.features, &sae_cfg)?;
    if let Some(l) = history.final_loss() {
        info!("sae: {} epochs, final loss {l:.6}", history.epochs_completed());
    }
    Ok((sae, history))
}

/// Replaces normalized features with latent codes.
pub fn encode_examples(sae: &SaeModel, table: &ExampleTable) -> Result<ExampleTable> {
    ExampleTable::new(sae.encode_table(&table.features)?, table.labels.clone())
}

/// Trains a fresh classifier. `table` holds latent codes, or normalized
/// rows when `encoder` is given and fine-tuning is enabled.
pub fn train_lstm(
    cfg: &PipelineConfig,
    table: &ExampleTable,
    encoder: Option<&mut SaeModel>,
) -> Result<(LstmClassifier, TrainHistory)> {
    let lstm_cfg = cfg.lstm_config();
    let mut clf = build_classifier_with(&cfg.classifier, lstm_cfg.seed)?;
    let history = train_classifier(&mut clf, &table.features, &table.labels, &lstm_cfg, encoder)?;
    if let (Some(l), Some(a)) = (history.final_loss(), history.epoch_accuracy.last()) {
        info!(
            "lstm: {} epochs, final loss {l:.6}, train accuracy {a:.4}",
            history.epochs_completed()
        );
    }
    Ok((clf, history))
}

/// Scores normalized rows; labels are taken at each window end.
pub fn evaluate_normalized(bundle: &ModelBundle, table: &ExampleTable) -> Result<MetricsReport> {
    let preds = bundle.predict_normalized(&table.features)?;
    let truth: Vec<usize> = window_ends(table.len(), bundle.classifier.seq_len)
        .map(|e| table.labels[e])
        .collect();
    MetricsReport::from_predictions(&truth, &preds, bundle.schema.class_labels.clone())
}

/// Scores a raw CSV with the bundle's stored vocabularies and scaling.
pub fn evaluate_only(bundle: &ModelBundle, data: &Path) -> Result<MetricsReport> {
    let raw = parse_csv(data, &bundle.schema).map_err(|e| e.in_stage("parse"))?;
    let x = bundle.prepare(&raw).map_err(|e| e.in_stage("preprocess"))?;
    let table = ExampleTable::new(x, raw.labels)?;
    evaluate_normalized(bundle, &table).map_err(|e| e.in_stage("evaluate"))
}

/// Wall-clock information; the only part of a report that varies between
/// identical runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub generated_at_unix: u64,
    pub stage_seconds: BTreeMap<String, f64>,
}

impl Timings {
    pub fn now() -> Self {
        Timings {
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            stage_seconds: BTreeMap::new(),
        }
    }
}

/// The JSON report written next to the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub artifact_version: u32,
    pub accuracy: f64,
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub weighted_avg: Averages,
    pub macro_avg: Averages,
    pub total_support: u64,
    pub labels: Vec<String>,
    /// Rows are true classes.
    pub confusion_matrix: Vec<Vec<u64>>,
    pub config_fingerprint: String,
    pub config_echo: Option<PipelineConfig>,
    pub seeds: Option<Seeds>,
    pub timings: Timings,
}

impl PipelineReport {
    pub fn new(
        metrics: &MetricsReport,
        config: Option<&PipelineConfig>,
        config_fingerprint: String,
        timings: Timings,
    ) -> Self {
        PipelineReport {
            artifact_version: FORMAT_VERSION,
            accuracy: metrics.accuracy,
            per_class: metrics
                .labels
                .iter()
                .cloned()
                .zip(metrics.per_class.iter().copied())
                .collect(),
            weighted_avg: metrics.weighted_avg,
            macro_avg: metrics.macro_avg,
            total_support: metrics.total_support,
            labels: metrics.labels.clone(),
            confusion_matrix: metrics.confusion.rows(),
            config_fingerprint,
            config_echo: config.cloned(),
            seeds: config.map(|c| c.seeds),
            timings,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// The report with `timings` cleared, for reproducibility comparisons.
    pub fn without_timings(&self) -> Self {
        PipelineReport {
            timings: Timings::default(),
            ..self.clone()
        }
    }
}

/// Files written by a run, all inside the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub bundle: PathBuf,
    pub manifest: PathBuf,
    pub sae_history: PathBuf,
    pub lstm_history: PathBuf,
    pub report: PathBuf,
    pub report_table: PathBuf,
    pub confusion_csv: PathBuf,
}

impl Artifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Artifacts {
            dir: dir.to_path_buf(),
            bundle: dir.join("model.bundle"),
            manifest: dir.join("manifest.json"),
            sae_history: dir.join("sae_history.json"),
            lstm_history: dir.join("lstm_history.json"),
            report: dir.join("report.json"),
            report_table: dir.join("report.txt"),
            confusion_csv: dir.join("confusion_matrix.csv"),
        }
    }
}

/// Writes `report.json`, `report.txt` and `confusion_matrix.csv`.
pub fn write_report(
    art: &Artifacts,
    report: &PipelineReport,
    metrics: &MetricsReport,
    cfg_average: crate::metrics::AverageKind,
) -> Result<()> {
    let write = |p: &Path, s: String| std::fs::write(p, s).map_err(|e| Error::io(p, e));
    write(&art.report, report.to_json())?;
    write(&art.report_table, metrics.to_table_with(cfg_average))?;
    write(&art.confusion_csv, metrics.confusion.to_csv(&metrics.labels))
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: PipelineReport,
    pub metrics: MetricsReport,
    pub bundle: ModelBundle,
    pub manifest: Manifest,
    pub sae_history: TrainHistory,
    pub lstm_history: TrainHistory,
    pub artifacts: Artifacts,
}

fn timed<T>(timings: &mut Timings, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage));
    timings
        .stage_seconds
        .insert(stage.to_string(), start.elapsed().as_secs_f64());
    out
}

/// Preprocess, pretrain the SAE, encode, train the LSTM, evaluate on the
/// held-out split, then write every artifact. Nothing is written unless all
/// stages succeed.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineRun> {
    cfg.validate().map_err(|e| e.in_stage("config"))?;
    let mut timings = Timings::now();
    let pre = timed(&mut timings, "preprocess", || preprocess(cfg))?;
    let (mut sae, sae_history) = timed(&mut timings, "sae", || pretrain_sae(cfg, &pre.train))?;
    let (classifier, lstm_history) = if cfg.lstm.fine_tune_encoder {
        timed(&mut timings, "lstm", || train_lstm(cfg, &pre.train, Some(&mut sae)))?
    } else {
        let latent = timed(&mut timings, "encode", || encode_examples(&sae, &pre.train))?;
        timed(&mut timings, "lstm", || train_lstm(cfg, &latent, None))?
    };
    let m = &pre.manifest;
    let bundle = ModelBundle::new(
        m.schema.clone(),
        m.vocab.clone(),
        m.vocab_mode,
        m.stats.clone(),
        sae,
        classifier,
        m.config_fingerprint.clone(),
    )
    .map_err(|e| e.in_stage("bundle"))?;
    let metrics = timed(&mut timings, "evaluate", || evaluate_normalized(&bundle, &pre.test))?;
    info!("evaluate: accuracy {:.6} on {} rows", metrics.accuracy, metrics.total_support);
    let report = PipelineReport::new(&metrics, Some(cfg), m.config_fingerprint.clone(), timings);

    let artifacts = Artifacts::in_dir(&cfg.output_dir);
    (|| {
        std::fs::create_dir_all(&artifacts.dir).map_err(|e| Error::io(&artifacts.dir, e))?;
        bundle.save(&artifacts.bundle)?;
        pre.manifest.save(&artifacts.manifest)?;
        write_json(&artifacts.sae_history, &sae_history.without_timings())?;
        write_json(&artifacts.lstm_history, &lstm_history.without_timings())?;
        write_report(&artifacts, &report, &metrics, cfg.average)
    })()
    .map_err(|e| e.in_stage("write"))?;
    info!("artifacts written to {}", artifacts.dir.display());

    Ok(PipelineRun {
        report,
        metrics,
        bundle,
        manifest: pre.manifest,
        sae_history,
        lstm_history,
        artifacts,
    })
}
