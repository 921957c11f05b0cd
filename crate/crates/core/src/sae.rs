//! Stacked autoencoder: three encoder layers (13→75→50→13) mirrored by three
//! decoder layers (13→50→75→13), pretrained on reconstruction MSE.
//!
//! The encoder output is the 13-wide latent code handed to the classifier.
//! All layers use relu except the final decoder layer, which is linear so
//! reconstructions can reach the edges of the normalized `[0, 1]` range.

use std::time::Instant;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::TrainHistory;
use crate::numerics::{
    count_params, mse_loss, Activation, Adam, AdamConfig, DenseGrads, DenseLayer, LayerSpec, Matrix,
};

/// Layer widths from input to reconstruction.
pub const SAE_DIMS: [usize; 7] = [13, 75, 50, 13, 50, 75, 13];

/// Number of leading layers that make up the encoder.
pub const ENCODER_DEPTH: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretrainMode {
    /// Train all six layers jointly on reconstruction MSE.
    #[default]
    EndToEnd,
    /// Greedy: train each encoder layer with its mirrored decoder layer to
    /// reconstruct that encoder layer's input, innermost last.
    LayerWise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaeConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub mode: PretrainMode,
}

impl Default for SaeConfig {
    fn default() -> Self {
        SaeConfig {
            epochs: 50,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 42,
            mode: PretrainMode::EndToEnd,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaeModel {
    layers: Vec<DenseLayer>,
    seed: u64,
}

/// Glorot-initialized autoencoder with the fixed 13→75→50→13→50→75→13 layout.
pub fn build_sae(seed: u64) -> SaeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = SAE_DIMS
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i == SAE_DIMS.len() - 2 {
                Activation::Identity
            } else {
                Activation::Relu
            };
            DenseLayer::glorot(w[0], w[1], act, &mut rng)
        })
        .collect();
    SaeModel { layers, seed }
}

impl SaeModel {
    /// Rebuilds a model from stored layers, checking the layer chain.
    pub fn from_layers(layers: Vec<DenseLayer>, seed: u64) -> Result<Self> {
        if layers.len() != SAE_DIMS.len() - 1 {
            return Err(Error::shape("SaeModel::from_layers", "6 layers", layers.len()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in() != SAE_DIMS[i] || l.fan_out() != SAE_DIMS[i + 1] {
                return Err(Error::shape(
                    "SaeModel::from_layers",
                    format!("layer {i} {}→{}", SAE_DIMS[i], SAE_DIMS[i + 1]),
                    format!("{}→{}", l.fan_in(), l.fan_out()),
                ));
            }
        }
        Ok(SaeModel { layers, seed })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.layers[..ENCODER_DEPTH]
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.layers[ENCODER_DEPTH..]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn latent_width(&self) -> usize {
        self.layers[ENCODER_DEPTH - 1].fan_out()
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec::Dense {
                fan_in: l.fan_in(),
                fan_out: l.fan_out(),
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.layer_specs()).1
    }

    fn check_width(&self, op: &'static str, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::shape(op, self.input_width(), x.len()));
        }
        Ok(())
    }

    /// Latent code: the first three layers.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width("sae encode", x)?;
        Ok(run(self.encoder(), x))
    }

    pub fn encode_table(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_width() {
            return Err(Error::shape("sae encode", self.input_width(), x.cols()));
        }
        let mut out = Matrix::zeros(x.rows(), self.latent_width());
        for r in 0..x.rows() {
            out.row_mut(r).copy_from_slice(&run(self.encoder(), x.row(r)));
        }
        Ok(out)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.latent_width() {
            return Err(Error::shape("sae decode", self.latent_width(), z.len()));
        }
        Ok(run(self.decoder(), z))
    }

    /// Full six-layer pass.
    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_width("sae reconstruct", x)?;
        Ok(run(&self.layers, x))
    }

    /// Encoder activations: `[x, h1, h2, z]`.
    pub(crate) fn encoder_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        trace(self.encoder(), x)
    }

    /// Backpropagates `upstream = dL/dz` through the encoder, accumulating into `grads`.
    pub(crate) fn encoder_backward(
        &self,
        acts: &[Vec<f64>],
        upstream: &[f64],
        grads: &mut [DenseGrads],
    ) {
        let mut g = upstream.to_vec();
        for i in (0..ENCODER_DEPTH).rev() {
            let gx = self.layers[i].backward_acc(&acts[i], &acts[i + 1], &mut g, &mut grads[i], i > 0);
            if let Some(gx) = gx {
                g = gx;
            }
        }
    }

    /// Mean reconstruction MSE over the rows of `data`.
    pub fn reconstruction_mse(&self, data: &Matrix) -> Result<f64> {
        if data.cols() != self.input_width() {
            return Err(Error::shape("reconstruction_mse", self.input_width(), data.cols()));
        }
        let mut total = 0.0;
        for r in 0..data.rows() {
            let x = data.row(r);
            total += mse_loss(&run(&self.layers, x), x)?.0;
        }
        Ok(total / data.rows().max(1) as f64)
    }
}

fn run(layers: &[DenseLayer], x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for l in layers {
        let mut next = vec![0.0; l.fan_out()];
        l.forward_into(&cur, &mut next);
        cur = next;
    }
    cur
}

fn trace(layers: &[DenseLayer], x: &[f64]) -> Vec<Vec<f64>> {
    let mut acts = Vec::with_capacity(layers.len() + 1);
    acts.push(x.to_vec());
    for l in layers {
        let mut next = vec![0.0; l.fan_out()];
        l.forward_into(acts.last().expect("non-empty"), &mut next);
        acts.push(next);
    }
    acts
}

/// Trains `model` on reconstruction MSE with Adam.
pub fn train_sae(model: &mut SaeModel, data: &Matrix, cfg: &SaeConfig) -> Result<TrainHistory> {
    if data.cols() != model.input_width() {
        return Err(Error::shape("train_sae", model.input_width(), data.cols()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.mode {
        PretrainMode::EndToEnd => {
            let chain: Vec<usize> = (0..model.layers.len()).collect();
            fit_chain(&mut model.layers, &chain, data, cfg, &mut rng)
        }
        PretrainMode::LayerWise => {
            let n = model.layers.len();
            let mut history = TrainHistory::default();
            let mut input = data.clone();
            for k in 0..ENCODER_DEPTH {
                let chain = [k, n - 1 - k];
                history.extend(fit_chain(&mut model.layers, &chain, &input, cfg, &mut rng)?);
                let enc = &model.layers[k];
                let mut next = Matrix::zeros(input.rows(), enc.fan_out());
                for r in 0..input.rows() {
                    enc.forward_into(input.row(r), next.row_mut(r));
                }
                input = next;
            }
            Ok(history)
        }
    }
}

/// Trains the layers at ascending indices `chain`, composed in that order,
/// to reproduce their own input.
fn fit_chain(
    layers: &mut [DenseLayer],
    chain: &[usize],
    data: &Matrix,
    cfg: &SaeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainHistory> {
    debug_assert!(chain.windows(2).all(|w| w[0] < w[1]));
    let mut history = TrainHistory::default();
    if cfg.epochs == 0 || data.rows() == 0 {
        return Ok(history);
    }
    let sizes: Vec<usize> = chain
        .iter()
        .flat_map(|&i| [layers[i].param_count() - layers[i].fan_out(), layers[i].fan_out()])
        .collect();
    let mut adam = Adam::new(cfg.adam, &sizes);
    let mut order: Vec<usize> = (0..data.rows()).collect();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(rng);
        let mut epoch_total = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads: Vec<DenseGrads> =
                chain.iter().map(|&i| DenseGrads::zeros_like(&layers[i])).collect();
            let mut batch_total = 0.0;
            for &r in batch {
                let x = data.row(r);
                let mut acts = Vec::with_capacity(chain.len() + 1);
                acts.push(x.to_vec());
                for &i in chain {
                    let mut next = vec![0.0; layers[i].fan_out()];
                    layers[i].forward_into(acts.last().expect("non-empty"), &mut next);
                    acts.push(next);
                }
                let (loss, mut g) = mse_loss(acts.last().expect("non-empty"), x)?;
                batch_total += loss;
                for (pos, &i) in chain.iter().enumerate().rev() {
                    if let Some(gx) = layers[i].backward_acc(
                        &acts[pos],
                        &acts[pos + 1],
                        &mut g,
                        &mut grads[pos],
                        pos > 0,
                    ) {
                        g = gx;
                    }
                }
            }
            let batch_loss = batch_total / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Numeric {
                    stage: "sae",
                    epoch,
                    batch: b + 1,
                    loss: batch_loss,
                });
            }
            epoch_total += batch_total;
            let inv = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| g.scale(inv));
            let grad_slices: Vec<&[f64]> = grads
                .iter()
                .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
                .collect();
            let params: Vec<&mut [f64]> = layers
                .iter_mut()
                .enumerate()
                .filter(|(i, _)| chain.contains(i))
                .flat_map(|(_, l)| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
                .collect();
            adam.step(params, &grad_slices)?;
        }
        let loss = epoch_total / data.rows() as f64;
        debug!("sae layers {chain:?} epoch {epoch}: mse {loss:.6}");
        history.push(loss, None, start.elapsed().as_secs_f64());
    }
    Ok(history)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    /// L1 norm of each input column of the first encoder layer.
    #[default]
    WeightL1,
    /// First-layer column weights scaled by each hidden unit's mean absolute
    /// activation over a dataset.
    Activation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub name: String,
    pub index: usize,
    pub score: f64,
}

/// L1 norm of every column of `w`.
pub fn l1_column_norms(w: &Matrix) -> Vec<f64> {
    let mut norms = vec![0.0; w.cols()];
    for r in 0..w.rows() {
        for (n, v) in norms.iter_mut().zip(w.row(r)) {
            *n += v.abs();
        }
    }
    norms
}

/// Normalizes raw scores to sum to 1 and sorts descending, ties by index.
/// All-zero scores become uniform.
pub fn rank_scores(names: &[String], raw: &[f64]) -> Result<Vec<FeatureScore>> {
    if names.len() != raw.len() {
        return Err(Error::Schema(format!(
            "{} feature names for {} input columns",
            names.len(),
            raw.len()
        )));
    }
    let total: f64 = raw.iter().sum();
    let mut out: Vec<FeatureScore> = names
        .iter()
        .zip(raw)
        .enumerate()
        .map(|(index, (name, &r))| FeatureScore {
            name: name.clone(),
            index,
            score: if total > 0.0 { r / total } else { 1.0 / raw.len() as f64 },
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    Ok(out)
}

/// Ranks input features by the first encoder layer's column L1 norms.
pub fn feature_importance(model: &SaeModel, names: &[String]) -> Result<Vec<FeatureScore>> {
    feature_importance_with(model, names, ImportanceMethod::WeightL1, None)
}

pub fn feature_importance_with(
    model: &SaeModel,
    names: &[String],
    method: ImportanceMethod,
    data: Option<&Matrix>,
) -> Result<Vec<FeatureScore>> {
    let first = &model.layers[0];
    let raw = match method {
        ImportanceMethod::WeightL1 => l1_column_norms(&first.weights),
        ImportanceMethod::Activation => {
            let data = data.ok_or_else(|| {
                Error::Config("activation-based importance needs a dataset".into())
            })?;
            if data.cols() != first.fan_in() {
                return Err(Error::shape("feature_importance", first.fan_in(), data.cols()));
            }
            let mut mean_act = vec![0.0; first.fan_out()];
            let mut h = vec![0.0; first.fan_out()];
            for r in 0..data.rows() {
                first.forward_into(data.row(r), &mut h);
                for (m, v) in mean_act.iter_mut().zip(&h) {
                    *m += v.abs();
                }
            }
            let n = data.rows().max(1) as f64;
            mean_act.iter_mut().for_each(|m| *m /= n);
            let mut raw = vec![0.0; first.fan_in()];
            for (k, &a) in mean_act.iter().enumerate() {
                for (j, w) in first.weights.row(k).iter().enumerate() {
                    raw[j] += a * w.abs();
                }
            }
            raw
        }
    };
    rank_scores(names, &raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataflow::synthetic::low_rank_table;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn layout_and_param_counts() {
        let m = build_sae(1);
        let per: Vec<usize> = m.layer_specs().iter().map(|s| s.param_count()).collect();
        assert_eq!(per, vec![1050, 3800, 663, 700, 3825, 988]);
        assert_eq!(m.param_count(), 11026);
        assert_eq!(m.latent_width(), m.input_width());
        assert_eq!(m.layers()[5].activation, Activation::Identity);
        assert!(m.layers()[..5].iter().all(|l| l.activation == Activation::Relu));
        assert!(m.layers().iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn same_seed_same_weights() {
        assert_eq!(build_sae(5), build_sae(5));
        assert_ne!(build_sae(5), build_sae(6));
    }

    #[test]
    fn shapes() {
        let m = build_sae(2);
        let x = vec![0.5; 13];
        assert_eq!(m.encode(&x).unwrap().len(), 13);
        assert_eq!(m.reconstruct(&x).unwrap().len(), 13);
        assert!(matches!(m.encode(&[0.0; 12]), Err(Error::Shape { .. })));
        assert!(matches!(m.reconstruct(&[0.0; 14]), Err(Error::Shape { .. })));
    }

    #[test]
    fn encode_is_three_dense_passes() {
        let m = build_sae(3);
        let x: Vec<f64> = (0..13).map(|i| i as f64 / 13.0).collect();
        let mut h = x.clone();
        for l in m.encoder() {
            h = l.forward(&h).unwrap();
        }
        assert_eq!(m.encode(&x).unwrap(), h);
        let recon = m.decode(&h).unwrap();
        assert_eq!(m.reconstruct(&x).unwrap(), recon);
        assert!(recon.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn zero_encoder_gives_zero_code() {
        let mut m = build_sae(4);
        for l in &mut m.layers_mut()[..ENCODER_DEPTH] {
            l.weights.fill(0.0);
        }
        assert_eq!(m.encode(&[0.7; 13]).unwrap(), vec![0.0; 13]);
    }

    #[test]
    fn zero_epochs_is_noop() {
        let mut m = build_sae(1);
        let before = m.clone();
        let cfg = SaeConfig {
            epochs: 0,
            ..Default::default()
        };
        let h = train_sae(&mut m, &low_rank_table(50, 13, 3, 0.02, 0), &cfg).unwrap();
        assert_eq!(h.epochs_completed(), 0);
        assert_eq!(m, before);
    }

    #[test]
    fn training_is_deterministic() {
        let data = low_rank_table(100, 13, 3, 0.02, 9);
        let cfg = SaeConfig {
            epochs: 3,
            ..Default::default()
        };
        let mut a = build_sae(1);
        let mut b = build_sae(1);
        let ha = train_sae(&mut a, &data, &cfg).unwrap();
        let hb = train_sae(&mut b, &data, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.without_timings(), hb.without_timings());
    }

    #[test]
    fn nan_input_is_a_numeric_failure() {
        let mut data = low_rank_table(40, 13, 3, 0.02, 9);
        data.set(7, 3, f64::NAN);
        let cfg = SaeConfig {
            epochs: 2,
            batch_size: 8,
            ..Default::default()
        };
        let err = train_sae(&mut build_sae(1), &data, &cfg).unwrap_err();
        assert!(matches!(err, Error::Numeric { stage: "sae", epoch: 1, .. }));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn constant_dataset_is_reconstructed() {
        let c: Vec<f64> = (0..13).map(|j| 0.2 + 0.05 * j as f64).collect();
        let data = Matrix::from_rows(&vec![c.clone(); 64]).unwrap();
        let mut m = build_sae(11);
        let cfg = SaeConfig {
            epochs: 50,
            batch_size: 8,
            ..Default::default()
        };
        train_sae(&mut m, &data, &cfg).unwrap();
        let r = m.reconstruct(&c).unwrap();
        let mae = r.iter().zip(&c).map(|(a, b)| (a - b).abs()).sum::<f64>() / 13.0;
        assert!(mae < 0.05, "mean abs error {mae}");
    }

    #[test]
    fn layerwise_mode_reduces_error() {
        let data = low_rank_table(200, 13, 3, 0.02, 4);
        let mut m = build_sae(2);
        let before = m.reconstruction_mse(&data).unwrap();
        let cfg = SaeConfig {
            epochs: 10,
            mode: PretrainMode::LayerWise,
            ..Default::default()
        };
        let h = train_sae(&mut m, &data, &cfg).unwrap();
        assert_eq!(h.epochs_completed(), 30);
        let after = m.reconstruction_mse(&data).unwrap();
        assert!(after < before, "{after} !< {before}");
    }

    #[test]
    fn importance_hand_example() {
        let w = Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.0, 2.0]).unwrap();
        let raw = l1_column_norms(&w);
        assert_eq!(raw, vec![1.0, 4.0]);
        let ranked = rank_scores(&names(2), &raw).unwrap();
        assert_eq!(ranked[0].index, 1);
        assert!((ranked[0].score - 0.8).abs() < 1e-15);
        assert!((ranked[1].score - 0.2).abs() < 1e-15);
    }

    #[test]
    fn importance_zero_column_ranks_last() {
        let mut m = build_sae(3);
        for r in 0..75 {
            m.layers_mut()[0].weights.set(r, 4, 0.0);
        }
        let ranked = feature_importance(&m, &names(13)).unwrap();
        let last = ranked.last().unwrap();
        assert_eq!((last.index, last.score), (4, 0.0));
    }

    #[test]
    fn importance_identical_columns_are_uniform() {
        let mut m = build_sae(3);
        for r in 0..75 {
            let v = m.layers()[0].weights.get(r, 0);
            for c in 0..13 {
                m.layers_mut()[0].weights.set(r, c, v);
            }
        }
        let ranked = feature_importance(&m, &names(13)).unwrap();
        for (pos, s) in ranked.iter().enumerate() {
            assert!((s.score - 1.0 / 13.0).abs() < 1e-15);
            assert_eq!(s.index, pos);
        }
    }

    #[test]
    fn importance_name_mismatch() {
        let m = build_sae(3);
        assert!(matches!(
            feature_importance(&m, &names(12)),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn activation_importance_needs_data() {
        let m = build_sae(3);
        assert!(feature_importance_with(&m, &names(13), ImportanceMethod::Activation, None).is_err());
        let data = low_rank_table(30, 13, 3, 0.02, 1);
        let r = feature_importance_with(&m, &names(13), ImportanceMethod::Activation, Some(&data))
            .unwrap();
        assert!((r.iter().map(|s| s.score).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn importance_is_normalized_and_permutation_equivariant(
            seed in any::<u64>(),
            perm in Just((0..13).collect::<Vec<usize>>()).prop_shuffle(),
        ) {
            let m = build_sae(seed);
            let n = names(13);
            let base = feature_importance(&m, &n).unwrap();
            let sum: f64 = base.iter().map(|s| s.score).sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(base.iter().all(|s| s.score >= 0.0));

            // Column j of the permuted model is column perm[j] of the original.
            let mut pm = m.clone();
            for r in 0..75 {
                for j in 0..13 {
                    let v = m.layers()[0].weights.get(r, perm[j]);
                    pm.layers_mut()[0].weights.set(r, j, v);
                }
            }
            let pn: Vec<String> = perm.iter().map(|&p| n[p].clone()).collect();
            let permuted = feature_importance(&pm, &pn).unwrap();
            for j in 0..13 {
                let orig = base.iter().find(|s| s.index == perm[j]).unwrap();
                let now = permuted.iter().find(|s| s.index == j).unwrap();
                prop_assert!((orig.score - now.score).abs() < 1e-15);
                prop_assert_eq!(&orig.name, &now.name);
            }
        }
    }
}
