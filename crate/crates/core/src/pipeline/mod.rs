//! End-to-end orchestration, configuration, reports and model persistence.

mod bundle;
mod config;
pub mod container;
mod stages;
mod workspace;

pub use bundle::{load_classifier, load_sae, save_classifier, save_sae, ModelBundle};
pub use config::{PipelineConfig, Seeds, OUTPUT_DIR_ENV};
pub use container::{FORMAT_VERSION, MAGIC};
pub use stages::{
    encode_examples, evaluate_normalized, evaluate_only, load_schema, preprocess, pretrain_sae,
    run_pipeline, train_lstm, write_report, Artifacts, Manifest, PipelineReport, PipelineRun,
    Preprocessed, RowCounts, Timings,
};
pub use workspace::Workspace;
