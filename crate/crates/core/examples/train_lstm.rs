//! Fits the LSTM classifier to a small separable problem until it is perfect.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saelstm::lstm::{accuracy, build_classifier, train_classifier, LstmConfig};
use saelstm::numerics::Matrix;

fn main() -> saelstm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let mut data = Vec::new();
    for &c in &labels {
        for j in 0..13 {
            let centre = if j % 3 == c { 0.8 } else { 0.2 };
            data.push(centre + rng.gen_range(-0.05..0.05));
        }
    }
    let x = Matrix::from_vec(60, 13, data)?;

    let mut clf = build_classifier(13, 168, 3, 42);
    let cfg = LstmConfig {
        epochs: 200,
        ..Default::default()
    };
    let history = train_classifier(&mut clf, &x, &labels, &cfg, None)?;
    for e in [0, 9, 49, 99, 199] {
        println!(
            "epoch {:>3}  loss {:.6}  accuracy {:.3}",
            e + 1,
            history.epoch_loss[e],
            history.epoch_accuracy[e]
        );
    }
    println!("training accuracy {:.3}", accuracy(&clf, &x, &labels)?);
    Ok(())
}
