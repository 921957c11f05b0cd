//! Parsing, class balance, stratified split and the fitted preprocessing state.

use saelstm::dataflow::synthetic::{write_csv_file, SyntheticConfig};
use saelstm::dataflow::{class_distribution, ClassDistribution};
use saelstm::pipeline::{preprocess, PipelineConfig};

fn print_distribution(d: &ClassDistribution, labels: &[String]) {
    println!("{:<8}{:>8}{:>8}{:>8}", "", labels[0], labels[1], labels[2]);
    for (name, counts) in &d.subsets {
        println!("{name:<8}{:>8}{:>8}{:>8}", counts[0], counts[1], counts[2]);
    }
    println!("{:<8}{:>8}{:>8}{:>8}", "total", d.totals[0], d.totals[1], d.totals[2]);
}

fn main() -> saelstm::Result<()> {
    let dir = std::env::temp_dir().join("saelstm-preprocessing");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let data = dir.join("records.csv");
    write_csv_file(&SyntheticConfig { rows: 1000, ..Default::default() }, &data)?;
    let cfg = PipelineConfig {
        data_path: data,
        ..Default::default()
    };
    let pre = preprocess(&cfg)?;
    let m = &pre.manifest;
    println!("rows: {:?}", m.rows);
    let d = class_distribution(
        &[("train", &pre.train.labels[..]), ("test", &pre.test.labels[..])],
        3,
    );
    print_distribution(&d, &m.schema.class_labels);

    println!("\nvocabularies");
    for (col, values) in &m.vocab.columns {
        println!("  {col:<12}{} values, first {:?}", values.len(), &values[..values.len().min(3)]);
    }
    println!("\nscaling (train min / max)");
    for (j, name) in m.feature_names.iter().enumerate() {
        println!("  {name:<14}{:>12.4}{:>14.4}", m.stats.min[j], m.stats.max[j]);
    }
    println!("\nfirst normalized row: {:?}", pre.train.features.row(0));
    Ok(())
}
