//! Pretrains the autoencoder on a learnable low-rank table and ranks the inputs.

use saelstm::dataflow::synthetic::low_rank_table;
use saelstm::sae::{build_sae, feature_importance, train_sae, SaeConfig};

fn main() -> saelstm::Result<()> {
    let data = low_rank_table(2000, 13, 3, 0.01, 5);
    let mut sae = build_sae(42);
    let cfg = SaeConfig::default();
    let history = train_sae(&mut sae, &data, &cfg)?;
    for (e, l) in history.epoch_loss.iter().enumerate() {
        if e % 10 == 0 || e + 1 == history.epoch_loss.len() {
            println!("epoch {:>3}  mse {l:.6}", e + 1);
        }
    }
    let first = history.epoch_loss[0];
    let last = history.final_loss().unwrap_or(f64::NAN);
    println!("final / first = {:.4}", last / first);

    let names: Vec<String> = (0..13).map(|j| format!("f{j}")).collect();
    println!("\ntop features by first-layer weight mass");
    for s in feature_importance(&sae, &names)?.iter().take(5) {
        println!("  {:<4}{:.4}", s.name, s.score);
    }
    Ok(())
}
