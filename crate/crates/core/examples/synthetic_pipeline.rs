//! Full run on generated data: preprocess, SAE, encode, LSTM, evaluate.
//!
//! cargo run --release --example synthetic_pipeline -- [rows] [sae_epochs] [lstm_epochs]

use saelstm::dataflow::synthetic::{write_csv_file, SyntheticConfig};
use saelstm::pipeline::{run_pipeline, PipelineConfig};

fn main() -> saelstm::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut next = |d: usize| args.next().map_or(d, |s| s.parse().expect("integer argument"));
    let (rows, sae_epochs, lstm_epochs) = (next(3000), next(20), next(30));

    let dir = std::env::temp_dir().join("saelstm-synthetic");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let data = dir.join("records.csv");
    write_csv_file(
        &SyntheticConfig {
            rows,
            ..Default::default()
        },
        &data,
    )?;

    let mut cfg = PipelineConfig {
        data_path: data,
        output_dir: dir.join("out"),
        ..Default::default()
    };
    cfg.sae.epochs = sae_epochs;
    cfg.lstm.epochs = lstm_epochs;

    let run = run_pipeline(&cfg)?;
    print!("{}", run.metrics.to_table());
    for (stage, secs) in &run.report.timings.stage_seconds {
        println!("{stage:<12}{secs:>8.2}s");
    }
    println!("artifacts in {}", run.artifacts.dir.display());
    Ok(())
}
