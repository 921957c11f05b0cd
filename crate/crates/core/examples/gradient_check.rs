//! Analytic gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saelstm::lstm::{build_classifier_with, lstm_backward, lstm_forward, ClassifierSpec};
use saelstm::numerics::gradcheck::{max_rel_error, numeric_gradient};
use saelstm::numerics::{sparse_cce_loss, Matrix};

fn main() -> saelstm::Result<()> {
    for seq_len in [1, 3] {
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let spec = ClassifierSpec {
                input_dim: 3,
                units: 4,
                seq_len,
                ..Default::default()
            };
            let mut clf = build_classifier_with(&spec, seed)?;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let seq = Matrix::from_vec(
                seq_len,
                3,
                (0..seq_len * 3).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )?;
            let class = rng.gen_range(0..3);
            let (_, cache) = lstm_forward(&clf, &seq)?;
            let grads = lstm_backward(&clf, &cache, class)?;
            let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
            for (k, a) in analytic.iter().enumerate() {
                let mut params = clf.params_mut()[k].to_vec();
                let numeric = numeric_gradient(&mut params, |p| {
                    let mut probe = clf.clone();
                    probe.params_mut()[k].copy_from_slice(p);
                    let (probs, _) = lstm_forward(&probe, &seq).expect("forward");
                    sparse_cce_loss(&probs, class).expect("loss").0
                });
                worst = worst.max(max_rel_error(a, &numeric));
            }
        }
        println!("BPTT T={seq_len}: worst relative error over 10 seeds {worst:.2e}");
    }
    Ok(())
}
