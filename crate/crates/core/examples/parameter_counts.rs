//! Per-layer trainable parameter counts of both default models.

use saelstm::lstm::{build_classifier, LstmClassifier};
use saelstm::numerics::count_params;
use saelstm::sae::build_sae;

fn main() {
    let sae = build_sae(42);
    let (per_layer, total) = count_params(&sae.layer_specs());
    println!("stacked autoencoder");
    for (i, (l, n)) in sae.layers().iter().zip(&per_layer).enumerate() {
        println!("  dense_{i:<3}{:>3} -> {:<3}{n:>8}", l.fan_in(), l.fan_out());
    }
    println!("  total{total:>22}");

    let clf: LstmClassifier = build_classifier(13, 168, 3, 42);
    let (per_layer, total) = count_params(&clf.layer_specs());
    println!("lstm classifier");
    println!("  lstm (168 units){:>11}", per_layer[0]);
    println!("  dense (3, softmax){:>9}", per_layer[1]);
    println!("  total{total:>22}");
}
