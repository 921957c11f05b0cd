//! Ranks the 13 record features by the trained encoder's first layer.

use saelstm::dataflow::synthetic::{write_csv_file, SyntheticConfig};
use saelstm::pipeline::{preprocess, pretrain_sae, PipelineConfig};
use saelstm::sae::{feature_importance_with, ImportanceMethod};

fn main() -> saelstm::Result<()> {
    let dir = std::env::temp_dir().join("saelstm-importance");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let data = dir.join("records.csv");
    write_csv_file(&SyntheticConfig::default(), &data)?;
    let mut cfg = PipelineConfig {
        data_path: data,
        ..Default::default()
    };
    cfg.sae.epochs = 20;
    let pre = preprocess(&cfg)?;
    let (sae, _) = pretrain_sae(&cfg, &pre.train)?;
    let names = &pre.manifest.feature_names;
    for (label, method) in [
        ("weight L1", ImportanceMethod::WeightL1),
        ("activation", ImportanceMethod::Activation),
    ] {
        println!("{label}");
        let scores = feature_importance_with(&sae, names, method, Some(&pre.train.features))?;
        for (rank, s) in scores.iter().enumerate() {
            println!("  {:>2}. {:<15}{:.4}", rank + 1, s.name, s.score);
        }
    }
    Ok(())
}
