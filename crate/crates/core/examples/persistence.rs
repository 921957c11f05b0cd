//! Saves a bundle, reloads it, and shows how damaged files are rejected.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saelstm::dataflow::synthetic::{write_csv_file, SyntheticConfig};
use saelstm::numerics::Matrix;
use saelstm::pipeline::{run_pipeline, ModelBundle, PipelineConfig};

fn main() -> saelstm::Result<()> {
    let dir = std::env::temp_dir().join("saelstm-persistence");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let data = dir.join("records.csv");
    write_csv_file(&SyntheticConfig { rows: 600, ..Default::default() }, &data)?;
    let mut cfg = PipelineConfig {
        data_path: data,
        output_dir: dir.join("out"),
        ..Default::default()
    };
    cfg.sae.epochs = 5;
    cfg.lstm.epochs = 5;
    let run = run_pipeline(&cfg)?;

    let loaded = ModelBundle::load(&run.artifacts.bundle)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = Matrix::from_vec(1000, 13, (0..13_000).map(|_| rng.gen::<f64>()).collect())?;
    let a = run.bundle.probabilities_normalized(&x)?;
    let b = loaded.probabilities_normalized(&x)?;
    let same = a.iter().flatten().zip(b.iter().flatten()).all(|(u, v)| u.to_bits() == v.to_bits());
    println!("1000 random inputs, bit-identical probabilities: {same}");

    let bytes = std::fs::read(&run.artifacts.bundle).expect("bundle bytes");
    println!("bundle size {} bytes", bytes.len());
    let mut bad = bytes.clone();
    bad[..8].copy_from_slice(b"XXXXXXXX");
    println!("bad magic:  {}", ModelBundle::from_bytes(&bad).unwrap_err());
    println!("truncated:  {}", ModelBundle::from_bytes(&bytes[..bytes.len() / 2]).unwrap_err());
    let mut flipped = bytes;
    let mid = flipped.len() / 2;
    flipped[mid] ^= 1;
    println!("bit flip:   {}", ModelBundle::from_bytes(&flipped).unwrap_err());
    Ok(())
}
