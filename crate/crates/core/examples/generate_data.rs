//! Writes a synthetic UGRansome-format CSV.
//!
//! cargo run --example generate_data -- out.csv [rows] [seed]

use std::path::PathBuf;

use saelstm::dataflow::synthetic::{write_csv_file, SyntheticConfig};

fn main() -> saelstm::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(args.next().unwrap_or_else(|| "synthetic.csv".into()));
    let rows = args.next().map_or(3000, |s| s.parse().expect("rows must be an integer"));
    let seed = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));
    let cfg = SyntheticConfig {
        rows,
        seed,
        ..Default::default()
    };
    write_csv_file(&cfg, &path)?;
    println!("wrote {rows} rows to {}", path.display());
    Ok(())
}
