#![allow(dead_code)]

use std::path::Path;

use saelstm::dataflow::synthetic::{write_csv_file, SyntheticConfig};
use saelstm::pipeline::PipelineConfig;

pub fn write_data(dir: &Path, rows: usize, seed: u64) -> std::path::PathBuf {
    let data = dir.join(format!("data_{rows}_{seed}.csv"));
    write_csv_file(
        &SyntheticConfig {
            rows,
            seed,
            ..Default::default()
        },
        &data,
    )
    .unwrap();
    data
}

/// A fast config: few epochs and a narrow classifier.
pub fn quick_config(dir: &Path, rows: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        data_path: write_data(dir, rows, 7),
        output_dir: dir.join("out"),
        ..Default::default()
    };
    cfg.sae.epochs = 5;
    cfg.lstm.epochs = 5;
    cfg.classifier.units = 16;
    cfg
}

/// Copies the header and the given 0-based records of a CSV.
pub fn subset_csv(src: &Path, dst: &Path, records: &[usize]) {
    let text = std::fs::read_to_string(src).unwrap();
    let mut lines = text.lines();
    let mut out = String::from(lines.next().unwrap());
    out.push('\n');
    let body: Vec<&str> = lines.collect();
    for &r in records {
        out.push_str(body[r]);
        out.push('\n');
    }
    std::fs::write(dst, out).unwrap();
}
