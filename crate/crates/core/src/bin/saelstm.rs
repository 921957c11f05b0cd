use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use saelstm::dataflow::{ExampleTable, VocabMode};
use saelstm::metrics::AverageKind;
use saelstm::pipeline::{load_sae, run_pipeline, ModelBundle, PipelineConfig, Seeds, Workspace};
use saelstm::sae::{feature_importance_with, ImportanceMethod, PretrainMode};
use saelstm::{Error, Result};

#[derive(Parser)]
#[command(name = "saelstm", version, about = "SAE feature extraction + LSTM classification")]
struct Cli {
    #[command(flatten)]
    opts: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, split and normalize; writes manifest.json, train.csv, test.csv.
    Preprocess,
    /// Pretrain the autoencoder on train.csv; writes sae.bin.
    TrainSae,
    /// Encode both splits with sae.bin; writes *_latent.csv.
    Encode,
    /// Train the classifier; writes classifier.bin and model.bundle.
    TrainLstm,
    /// Score a bundle on --data (raw CSV) or on the workspace test split.
    Evaluate {
        #[arg(long)]
        bundle: Option<PathBuf>,
    },
    /// Run every stage and write all artifacts.
    Pipeline,
    /// Rank input features by the encoder's first layer.
    Importance {
        #[arg(long)]
        bundle: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "weight-l1")]
        method: Method,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    WeightL1,
    Activation,
}

/// Each flag overrides the matching config-file value.
#[derive(Args)]
struct Overrides {
    /// JSON pipeline config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[arg(long, global = true)]
    schema: Option<PathBuf>,
    /// Also settable with SAELSTM_OUTPUT_DIR.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Sets the split, SAE and LSTM seeds at once.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    split_fraction: Option<f64>,
    #[arg(long, global = true)]
    sae_epochs: Option<usize>,
    #[arg(long, global = true)]
    lstm_epochs: Option<usize>,
    #[arg(long, global = true)]
    batch_size: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Global-norm gradient clip for the LSTM; 0 disables it.
    #[arg(long, global = true)]
    clip: Option<f64>,
    #[arg(long, global = true)]
    units: Option<usize>,
    #[arg(long, global = true)]
    lstm_layers: Option<usize>,
    #[arg(long, global = true)]
    seq_len: Option<usize>,
    #[arg(long, global = true)]
    fine_tune: bool,
    #[arg(long, global = true)]
    layerwise: bool,
    #[arg(long, global = true)]
    strict_vocab: bool,
    #[arg(long, global = true)]
    drop_duplicates: bool,
    /// Show the macro average instead of the support-weighted one.
    #[arg(long, global = true)]
    r#macro: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        c.apply_env_overrides();
        if let Some(v) = &self.data {
            c.data_path = v.clone();
        }
        if let Some(v) = &self.schema {
            c.schema_path = Some(v.clone());
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(s) = self.seed {
            c.seeds = Seeds::all(s);
        }
        if let Some(v) = self.split_fraction {
            c.split_fraction = v;
        }
        if let Some(v) = self.sae_epochs {
            c.sae.epochs = v;
        }
        if let Some(v) = self.lstm_epochs {
            c.lstm.epochs = v;
        }
        if let Some(v) = self.batch_size {
            c.sae.batch_size = v;
            c.lstm.batch_size = v;
        }
        if let Some(v) = self.lr {
            c.sae.adam.lr = v;
            c.lstm.adam.lr = v;
        }
        if let Some(v) = self.clip {
            c.lstm.clip_norm = (v != 0.0).then_some(v);
        }
        if let Some(v) = self.units {
            c.classifier.units = v;
        }
        if let Some(v) = self.lstm_layers {
            c.classifier.layers = v;
        }
        if let Some(v) = self.seq_len {
            c.classifier.seq_len = v;
        }
        c.lstm.fine_tune_encoder |= self.fine_tune;
        if self.layerwise {
            c.sae.mode = PretrainMode::LayerWise;
        }
        if self.strict_vocab {
            c.vocab_mode = VocabMode::Strict;
        }
        c.drop_duplicates |= self.drop_duplicates;
        if self.r#macro {
            c.average = AverageKind::Macro;
        }
        Ok(c)
    }
}

fn importance(ws: &Workspace, bundle: Option<&Path>, method: Method) -> Result<()> {
    let (sae, names) = match bundle {
        Some(p) => {
            let b = ModelBundle::load(p)?;
            (b.sae, b.schema.feature_names())
        }
        None => (load_sae(&ws.sae_path())?, ws.manifest()?.feature_names),
    };
    let (method, data) = match method {
        Method::WeightL1 => (ImportanceMethod::WeightL1, None),
        Method::Activation => {
            let (t, _) = ExampleTable::read_csv(&ws.train_csv())?;
            (ImportanceMethod::Activation, Some(t.features))
        }
    };
    let scores = feature_importance_with(&sae, &names, method, data.as_ref())?;
    for (rank, s) in scores.iter().enumerate() {
        println!("{:>2}  {:<16}{:.6}", rank + 1, s.name, s.score);
    }
    std::fs::create_dir_all(&ws.dir).map_err(|e| Error::Io {
        path: ws.dir.clone(),
        source: e,
    })?;
    let out = ws.dir.join("importance.json");
    std::fs::write(&out, serde_json::to_string_pretty(&scores)?).map_err(|e| Error::Io {
        path: out,
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = cli.opts.resolve()?;
    let ws = Workspace::new(&cfg.output_dir);
    match cli.command {
        Command::Preprocess => {
            let p = ws.preprocess(&cfg)?;
            println!("train {} rows, test {} rows", p.train.len(), p.test.len());
        }
        Command::TrainSae => {
            let h = ws.train_sae(&cfg)?;
            println!("sae final loss {:.6}", h.final_loss().unwrap_or(f64::NAN));
        }
        Command::Encode => ws.encode()?,
        Command::TrainLstm => {
            let h = ws.train_lstm(&cfg)?;
            println!("lstm final loss {:.6}", h.final_loss().unwrap_or(f64::NAN));
        }
        Command::Evaluate { bundle } => {
            let (_, m) = ws.evaluate(&cfg, bundle.as_deref(), cli.opts.data.as_deref())?;
            print!("{}", m.to_table_with(cfg.average));
        }
        Command::Pipeline => {
            let r = run_pipeline(&cfg)?;
            print!("{}", r.metrics.to_table_with(cfg.average));
        }
        Command::Importance { bundle, method } => importance(&ws, bundle.as_deref(), method)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
