use crate::error::{Error, Result};

/// Lower clamp applied to probabilities inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean squared error and its gradient `2(pred - target)/n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::shape("mse_loss", pred.len(), target.len()));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let d = p - t;
            loss += d * d;
            2.0 * d / n
        })
        .collect();
    Ok((loss / n, grad))
}

/// Sparse categorical cross-entropy on softmax probabilities.
///
/// Returns `-ln(max(p[class], PROB_FLOOR))` and the gradient with respect to
/// the logits that produced `probs`, `probs - one_hot(class)`.
pub fn sparse_cce_loss(probs: &[f64], true_class: usize) -> Result<(f64, Vec<f64>)> {
    if true_class >= probs.len() {
        return Err(Error::Domain(format!(
            "class index {true_class} out of range for {} classes",
            probs.len()
        )));
    }
    let p = probs[true_class];
    let loss = if p.is_nan() { f64::NAN } else { -p.max(PROB_FLOOR).ln() };
    let mut grad = probs.to_vec();
    grad[true_class] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{central_difference, rel_error};
    use crate::numerics::softmax;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mse_hand_values() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.0);
        let (l, g) = mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 0.5);
        assert_eq!(g, vec![1.0, 0.0]);
        assert!(matches!(mse_loss(&[1.0], &[1.0, 2.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn mse_gradient_matches_finite_difference() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, g) = mse_loss(&p, &t).unwrap();
            for i in 0..p.len() {
                let n = central_difference(
                    |v| {
                        let mut q = p.clone();
                        q[i] = v;
                        mse_loss(&q, &t).unwrap().0
                    },
                    p[i],
                );
                assert!(rel_error(g[i], n) < 1e-6);
            }
        }
    }

    #[test]
    fn cce_hand_values() {
        assert_eq!(sparse_cce_loss(&[1.0, 0.0, 0.0], 0).unwrap().0, 0.0);
        for c in 0..3 {
            let (l, _) = sparse_cce_loss(&[1.0 / 3.0; 3], c).unwrap();
            assert!((l - 3f64.ln()).abs() < 1e-15);
            assert!((l - 1.0986).abs() < 1e-4);
        }
    }

    #[test]
    fn cce_clamps_zero_probability() {
        let (l, _) = sparse_cce_loss(&[1.0, 0.0], 1).unwrap();
        assert!((l - (-PROB_FLOOR.ln())).abs() < 1e-12);
    }

    #[test]
    fn cce_rejects_bad_class() {
        assert!(matches!(sparse_cce_loss(&[0.5, 0.5], 2), Err(Error::Domain(_))));
    }

    #[test]
    fn softmax_cce_gradient_matches_finite_difference() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let z: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let c = rng.gen_range(0..4);
            let (_, g) = sparse_cce_loss(&softmax(&z), c).unwrap();
            for i in 0..z.len() {
                let n = central_difference(
                    |v| {
                        let mut zz = z.clone();
                        zz[i] = v;
                        sparse_cce_loss(&softmax(&zz), c).unwrap().0
                    },
                    z[i],
                );
                assert!(rel_error(g[i], n) < 1e-5, "seed {seed} logit {i}");
            }
        }
    }
}
