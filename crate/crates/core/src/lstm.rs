//! LSTM classifier over latent codes: one (or more) stacked LSTM layers,
//! then a dense softmax head on the final hidden state.
//!
//! Gate pre-activations are stored stacked in the order input, forget,
//! cell candidate, output:
//!
//! ```text
//! i = σ(W_i x + U_i h + b_i)     f = σ(W_f x + U_f h + b_f)
//! g = tanh(W_g x + U_g h + b_g)  o = σ(W_o x + U_o h + b_o)
//! c' = f ⊙ c + i ⊙ g             h' = o ⊙ tanh(c')
//! ```

use std::time::Instant;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::TrainHistory;
use crate::numerics::{
    argmax, clip_global_norm, count_params, glorot_uniform_with, sigmoid, softmax_in_place,
    sparse_cce_loss, Activation, Adam, AdamConfig, DenseGrads, DenseLayer, LayerSpec, Matrix,
};
use crate::sae::{SaeModel, ENCODER_DEPTH};

const GATES: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    /// `4·units × input_dim`, gate blocks stacked i, f, g, o.
    pub w: Matrix,
    /// `4·units × units`.
    pub u: Matrix,
    /// `4·units`.
    pub b: Vec<f64>,
}

impl LstmCell {
    pub fn zeros(input_dim: usize, units: usize) -> Self {
        LstmCell {
            w: Matrix::zeros(GATES * units, input_dim),
            u: Matrix::zeros(GATES * units, units),
            b: vec![0.0; GATES * units],
        }
    }

    /// Per-gate Glorot weights, forget-gate bias 1, other biases 0.
    pub fn glorot<R: rand::Rng + ?Sized>(input_dim: usize, units: usize, rng: &mut R) -> Self {
        let mut cell = LstmCell::zeros(input_dim, units);
        for gate in 0..GATES {
            let wg = glorot_uniform_with(input_dim, units, rng);
            let ug = glorot_uniform_with(units, units, rng);
            for r in 0..units {
                cell.w.row_mut(gate * units + r).copy_from_slice(wg.row(r));
                cell.u.row_mut(gate * units + r).copy_from_slice(ug.row(r));
            }
        }
        cell.b[units..2 * units].fill(1.0);
        cell
    }

    pub fn from_parts(w: Matrix, u: Matrix, b: Vec<f64>) -> Result<Self> {
        let units = u.cols();
        if u.rows() != GATES * units || w.rows() != GATES * units || b.len() != GATES * units {
            return Err(Error::shape(
                "LstmCell::from_parts",
                format!("4·{units} gate rows"),
                format!("W {:?}, U {:?}, b {}", w.shape(), u.shape(), b.len()),
            ));
        }
        Ok(LstmCell { w, u, b })
    }

    #[inline]
    pub fn units(&self) -> usize {
        self.u.cols()
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn param_count(&self) -> usize {
        LayerSpec::Lstm {
            input_dim: self.input_dim(),
            units: self.units(),
        }
        .param_count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl CellState {
    pub fn zeros(units: usize) -> Self {
        CellState {
            h: vec![0.0; units],
            c: vec![0.0; units],
        }
    }

    fn is_zero(&self) -> bool {
        self.h.iter().all(|&v| v == 0.0)
    }
}

/// Intermediate values of one cell step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Gate activations stacked i, f, g, o.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
    h_prev_zero: bool,
}

pub fn lstm_cell_forward(
    cell: &LstmCell,
    x: &[f64],
    state: &CellState,
) -> Result<(CellState, StepCache)> {
    let n = cell.units();
    if x.len() != cell.input_dim() {
        return Err(Error::shape("lstm_cell_forward", cell.input_dim(), x.len()));
    }
    if state.h.len() != n || state.c.len() != n {
        return Err(Error::shape(
            "lstm_cell_forward state",
            n,
            format!("h {}, c {}", state.h.len(), state.c.len()),
        ));
    }
    Ok(cell_step(cell, x, state))
}

fn cell_step(cell: &LstmCell, x: &[f64], state: &CellState) -> (CellState, StepCache) {
    let n = cell.units();
    let mut z = vec![0.0; GATES * n];
    cell.w.matvec_into(x, &mut z);
    let h_prev_zero = state.is_zero();
    if !h_prev_zero {
        let mut zu = vec![0.0; GATES * n];
        cell.u.matvec_into(&state.h, &mut zu);
        z.iter_mut().zip(&zu).for_each(|(a, b)| *a += b);
    }
    z.iter_mut().zip(&cell.b).for_each(|(a, b)| *a += b);
    for (k, v) in z.iter_mut().enumerate() {
        *v = if k / n == 2 { v.tanh() } else { sigmoid(*v) };
    }
    let (i, rest) = z.split_at(n);
    let (f, rest) = rest.split_at(n);
    let (g, o) = rest.split_at(n);
    let mut c = vec![0.0; n];
    let mut tanh_c = vec![0.0; n];
    let mut h = vec![0.0; n];
    for k in 0..n {
        c[k] = f[k] * state.c[k] + i[k] * g[k];
        tanh_c[k] = c[k].tanh();
        h[k] = o[k] * tanh_c[k];
    }
    let next = CellState {
        h: h.clone(),
        c: c.clone(),
    };
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        gates: z,
        c,
        tanh_c,
        h,
        h_prev_zero,
    };
    (next, cache)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierSpec {
    pub input_dim: usize,
    pub units: usize,
    pub classes: usize,
    /// Number of stacked LSTM layers.
    pub layers: usize,
    /// Timesteps per sample.
    pub seq_len: usize,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            input_dim: 13,
            units: 168,
            classes: 3,
            layers: 1,
            seq_len: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmClassifier {
    pub cells: Vec<LstmCell>,
    /// `units → classes`, softmax.
    pub head: DenseLayer,
    pub seq_len: usize,
}

/// Builds a classifier with the default depth and sequence length.
pub fn build_classifier(input_dim: usize, units: usize, classes: usize, seed: u64) -> LstmClassifier {
    build_classifier_with(
        &ClassifierSpec {
            input_dim,
            units,
            classes,
            ..Default::default()
        },
        seed,
    )
    .expect("positive dimensions")
}

pub fn build_classifier_with(spec: &ClassifierSpec, seed: u64) -> Result<LstmClassifier> {
    if spec.input_dim == 0 || spec.units == 0 || spec.classes == 0 || spec.layers == 0 || spec.seq_len == 0
    {
        return Err(Error::Config(format!("classifier dimensions must be positive: {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = (0..spec.layers)
        .map(|l| {
            let d = if l == 0 { spec.input_dim } else { spec.units };
            LstmCell::glorot(d, spec.units, &mut rng)
        })
        .collect();
    let head = DenseLayer::glorot(spec.units, spec.classes, Activation::Softmax, &mut rng);
    Ok(LstmClassifier {
        cells,
        head,
        seq_len: spec.seq_len,
    })
}

/// Forward-pass record for [`lstm_backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// `steps[layer][t]`.
    pub steps: Vec<Vec<StepCache>>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellGrads {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierGrads {
    pub cells: Vec<CellGrads>,
    pub head: DenseGrads,
}

impl ClassifierGrads {
    pub fn zeros_like(clf: &LstmClassifier) -> Self {
        ClassifierGrads {
            cells: clf
                .cells
                .iter()
                .map(|c| CellGrads {
                    w: Matrix::zeros(c.w.rows(), c.w.cols()),
                    u: Matrix::zeros(c.u.rows(), c.u.cols()),
                    b: vec![0.0; c.b.len()],
                })
                .collect(),
            head: DenseGrads::zeros_like(&clf.head),
        }
    }

    /// Gradient tensors in the same order as [`LstmClassifier::params_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for c in &self.cells {
            out.extend([c.w.as_slice(), c.u.as_slice(), c.b.as_slice()]);
        }
        out.extend([self.head.weights.as_slice(), self.head.bias.as_slice()]);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for c in &mut self.cells {
            out.push(c.w.as_mut_slice());
            out.push(c.u.as_mut_slice());
            out.push(c.b.as_mut_slice());
        }
        out.push(self.head.weights.as_mut_slice());
        out.push(self.head.bias.as_mut_slice());
        out
    }
}

impl LstmClassifier {
    pub fn input_dim(&self) -> usize {
        self.cells[0].input_dim()
    }

    pub fn units(&self) -> usize {
        self.cells.last().expect("at least one layer").units()
    }

    pub fn classes(&self) -> usize {
        self.head.fan_out()
    }

    pub fn spec(&self) -> ClassifierSpec {
        ClassifierSpec {
            input_dim: self.input_dim(),
            units: self.units(),
            classes: self.classes(),
            layers: self.cells.len(),
            seq_len: self.seq_len,
        }
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let mut v: Vec<LayerSpec> = self
            .cells
            .iter()
            .map(|c| LayerSpec::Lstm {
                input_dim: c.input_dim(),
                units: c.units(),
            })
            .collect();
        v.push(LayerSpec::Dense {
            fan_in: self.head.fan_in(),
            fan_out: self.head.fan_out(),
        });
        v
    }

    pub fn param_count(&self) -> usize {
        count_params(&self.layer_specs()).1
    }

    /// Parameter tensors: per layer `W, U, b`, then head weights and bias.
    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for c in &mut self.cells {
            out.push(c.w.as_mut_slice());
            out.push(c.u.as_mut_slice());
            out.push(c.b.as_mut_slice());
        }
        out.push(self.head.weights.as_mut_slice());
        out.push(self.head.bias.as_mut_slice());
        out
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for c in &self.cells {
            out.extend([c.w.as_slice().len(), c.u.as_slice().len(), c.b.len()]);
        }
        out.extend([self.head.weights.as_slice().len(), self.head.bias.len()]);
        out
    }

    fn head_probs(&self, h: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.classes()];
        self.head.weights.matvec_into(h, &mut p);
        p.iter_mut().zip(&self.head.bias).for_each(|(a, b)| *a += b);
        softmax_in_place(&mut p);
        p
    }

    /// Class probabilities for one sequence, without caching.
    pub fn probabilities(&self, sequence: &Matrix) -> Result<Vec<f64>> {
        check_sequence(self, sequence)?;
        let mut inputs: Vec<Vec<f64>> = (0..sequence.rows()).map(|t| sequence.row(t).to_vec()).collect();
        for cell in &self.cells {
            let mut state = CellState::zeros(cell.units());
            for x in inputs.iter_mut() {
                state = cell_step(cell, x, &state).0;
                x.clone_from(&state.h);
            }
        }
        Ok(self.head_probs(inputs.last().expect("T ≥ 1")))
    }
}

fn check_sequence(clf: &LstmClassifier, sequence: &Matrix) -> Result<()> {
    if sequence.rows() == 0 {
        return Err(Error::shape("lstm_forward", "T ≥ 1 timesteps", 0));
    }
    if sequence.cols() != clf.input_dim() {
        return Err(Error::shape("lstm_forward", clf.input_dim(), sequence.cols()));
    }
    Ok(())
}

/// Runs every layer over `sequence` (`T × input_dim`) from a zero state and
/// applies the softmax head to the last hidden state.
pub fn lstm_forward(clf: &LstmClassifier, sequence: &Matrix) -> Result<(Vec<f64>, ForwardCache)> {
    check_sequence(clf, sequence)?;
    let mut steps = Vec::with_capacity(clf.cells.len());
    let mut inputs: Vec<Vec<f64>> = (0..sequence.rows()).map(|t| sequence.row(t).to_vec()).collect();
    for cell in &clf.cells {
        let mut state = CellState::zeros(cell.units());
        let mut layer_steps = Vec::with_capacity(inputs.len());
        for x in inputs.iter_mut() {
            let (next, cache) = cell_step(cell, x, &state);
            x.clone_from(&next.h);
            state = next;
            layer_steps.push(cache);
        }
        steps.push(layer_steps);
    }
    let probs = clf.head_probs(inputs.last().expect("T ≥ 1"));
    Ok((
        probs.clone(),
        ForwardCache { steps, probs },
    ))
}

/// Exact BPTT gradients of the sparse categorical cross-entropy.
pub fn lstm_backward(
    clf: &LstmClassifier,
    cache: &ForwardCache,
    true_class: usize,
) -> Result<ClassifierGrads> {
    let mut grads = ClassifierGrads::zeros_like(clf);
    backward_acc(clf, cache, true_class, &mut grads, false)?;
    Ok(grads)
}

/// Accumulates gradients into `grads`; returns the loss and, when asked,
/// `dL/dx_t` for every input timestep.
pub(crate) fn backward_acc(
    clf: &LstmClassifier,
    cache: &ForwardCache,
    true_class: usize,
    grads: &mut ClassifierGrads,
    want_input_grads: bool,
) -> Result<(f64, Option<Vec<Vec<f64>>>)> {
    if cache.steps.len() != clf.cells.len()
        || cache.probs.len() != clf.classes()
        || cache.steps.iter().zip(&clf.cells).any(|(s, c)| {
            s.is_empty() || s.iter().any(|st| st.h.len() != c.units() || st.x.len() != c.input_dim())
        })
    {
        return Err(Error::Internal(
            "forward cache does not match the classifier it is applied to".into(),
        ));
    }
    let (loss, dz_head) = sparse_cce_loss(&cache.probs, true_class)?;
    let t_len = cache.steps[0].len();
    let top = cache.steps.last().expect("non-empty");
    let h_last = &top[t_len - 1].h;
    grads.head.weights.add_outer(&dz_head, h_last);
    grads.head.bias.iter_mut().zip(&dz_head).for_each(|(g, d)| *g += d);

    // dh_out[t]: gradient reaching h_t of the current layer from above.
    let mut dh_out: Vec<Vec<f64>> = vec![vec![0.0; clf.units()]; t_len];
    clf.head.weights.matvec_t_acc(&dz_head, &mut dh_out[t_len - 1]);

    for (layer, cell) in clf.cells.iter().enumerate().rev() {
        let n = cell.units();
        let steps = &cache.steps[layer];
        let g = &mut grads.cells[layer];
        let need_dx = layer > 0 || want_input_grads;
        let mut dx_all: Vec<Vec<f64>> = Vec::with_capacity(if need_dx { t_len } else { 0 });
        let mut dh_next = vec![0.0; n];
        let mut dc_next = vec![0.0; n];
        let mut dz = vec![0.0; GATES * n];
        for t in (0..t_len).rev() {
            let s = &steps[t];
            let (i, rest) = s.gates.split_at(n);
            let (f, rest) = rest.split_at(n);
            let (gg, o) = rest.split_at(n);
            for k in 0..n {
                let dh = dh_out[t][k] + dh_next[k];
                let d_o = dh * s.tanh_c[k];
                let dc = dh * o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]) + dc_next[k];
                let d_i = dc * gg[k];
                let d_g = dc * i[k];
                let d_f = dc * s.c_prev[k];
                dc_next[k] = dc * f[k];
                dz[k] = d_i * i[k] * (1.0 - i[k]);
                dz[n + k] = d_f * f[k] * (1.0 - f[k]);
                dz[2 * n + k] = d_g * (1.0 - gg[k] * gg[k]);
                dz[3 * n + k] = d_o * o[k] * (1.0 - o[k]);
            }
            g.w.add_outer(&dz, &s.x);
            g.b.iter_mut().zip(&dz).for_each(|(a, b)| *a += b);
            if !s.h_prev_zero {
                g.u.add_outer(&dz, &s.h_prev);
            }
            if t > 0 {
                dh_next.fill(0.0);
                cell.u.matvec_t_acc(&dz, &mut dh_next);
            }
            if need_dx {
                let mut dx = vec![0.0; cell.input_dim()];
                cell.w.matvec_t_acc(&dz, &mut dx);
                dx_all.push(dx);
            }
        }
        if need_dx {
            dx_all.reverse();
            if layer > 0 {
                dh_out = dx_all;
            } else {
                return Ok((loss, Some(dx_all)));
            }
        }
    }
    Ok((loss, None))
}

/// Predicted class (ties to the lowest index) and probabilities for one record.
pub fn predict(clf: &LstmClassifier, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    let seq = Matrix::from_vec(1, x.len(), x.to_vec())?;
    predict_sequence(clf, &seq)
}

pub fn predict_sequence(clf: &LstmClassifier, sequence: &Matrix) -> Result<(usize, Vec<f64>)> {
    let p = clf.probabilities(sequence)?;
    Ok((argmax(&p), p))
}

/// End-row indices of every length-`seq_len` window over `n` consecutive records.
pub fn window_ends(n: usize, seq_len: usize) -> std::ops::Range<usize> {
    seq_len.saturating_sub(1).min(n)..n
}

/// Window of `seq_len` consecutive rows ending at `end`.
pub fn window(features: &Matrix, end: usize, seq_len: usize) -> Matrix {
    let idx: Vec<usize> = (end + 1 - seq_len..=end).collect();
    features.select_rows(&idx)
}

/// Predictions for every window end over `features` (one per row when `seq_len = 1`).
pub fn predict_table(clf: &LstmClassifier, features: &Matrix) -> Result<Vec<usize>> {
    window_ends(features.rows(), clf.seq_len)
        .map(|end| predict_sequence(clf, &window(features, end, clf.seq_len)).map(|r| r.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Global-norm gradient clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
    /// Let classifier gradients update the supplied encoder.
    pub fine_tune_encoder: bool,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            epochs: 400,
            batch_size: 32,
            adam: AdamConfig::default(),
            seed: 42,
            clip_norm: Some(5.0),
            fine_tune_encoder: false,
        }
    }
}

/// Trains with Adam on the mean batch cross-entropy.
///
/// `features` holds latent codes, or normalized raw features when
/// `encoder` is given and `fine_tune_encoder` is set; in that case the
/// encoder runs inside the loop and its three layers are updated too.
pub fn train_classifier(
    clf: &mut LstmClassifier,
    features: &Matrix,
    labels: &[usize],
    cfg: &LstmConfig,
    mut encoder: Option<&mut SaeModel>,
) -> Result<TrainHistory> {
    if features.rows() != labels.len() {
        return Err(Error::shape("train_classifier", features.rows(), labels.len()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= clf.classes()) {
        return Err(Error::Domain(format!("label {bad} out of range")));
    }
    let fine_tune = cfg.fine_tune_encoder && encoder.is_some();
    let expected_width = match (&encoder, fine_tune) {
        (Some(e), true) => e.input_width(),
        _ => clf.input_dim(),
    };
    if features.cols() != expected_width {
        return Err(Error::shape("train_classifier", expected_width, features.cols()));
    }
    if fine_tune && encoder.as_ref().is_some_and(|e| e.latent_width() != clf.input_dim()) {
        return Err(Error::shape(
            "train_classifier encoder",
            clf.input_dim(),
            encoder.as_ref().map_or(0, |e| e.latent_width()),
        ));
    }

    let mut history = TrainHistory::default();
    let t_len = clf.seq_len;
    let mut order: Vec<usize> = window_ends(features.rows(), t_len).collect();
    if cfg.epochs == 0 || order.is_empty() {
        return Ok(history);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(cfg.adam, &clf.param_sizes());
    let enc_sizes: Vec<usize> = encoder
        .as_ref()
        .map(|e| {
            e.encoder()
                .iter()
                .flat_map(|l| [l.weights.as_slice().len(), l.bias.len()])
                .collect()
        })
        .unwrap_or_default();
    let mut enc_adam = Adam::new(cfg.adam, &enc_sizes);

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = ClassifierGrads::zeros_like(clf);
            let mut enc_grads: Vec<DenseGrads> = match (&encoder, fine_tune) {
                (Some(e), true) => e.encoder().iter().map(DenseGrads::zeros_like).collect(),
                _ => Vec::new(),
            };
            let mut batch_loss = 0.0;
            for &end in batch {
                let rows = end + 1 - t_len..=end;
                let (seq, traces) = match (&encoder, fine_tune) {
                    (Some(e), true) => {
                        let traces: Vec<Vec<Vec<f64>>> =
                            rows.map(|r| e.encoder_trace(features.row(r))).collect();
                        let codes: Vec<Vec<f64>> =
                            traces.iter().map(|t| t[ENCODER_DEPTH].clone()).collect();
                        (Matrix::from_rows(&codes)?, traces)
                    }
                    _ => (window(features, end, t_len), Vec::new()),
                };
                let (probs, cache) = lstm_forward(clf, &seq)?;
                if argmax(&probs) == labels[end] {
                    correct += 1;
                }
                let (loss, dx) = backward_acc(clf, &cache, labels[end], &mut grads, fine_tune)?;
                batch_loss += loss;
                if let (Some(e), Some(dx)) = (&encoder, dx) {
                    for (trace, d) in traces.iter().zip(&dx) {
                        e.encoder_backward(trace, d, &mut enc_grads);
                    }
                }
            }
            let mean_loss = batch_loss / batch.len() as f64;
            if !mean_loss.is_finite() {
                return Err(Error::Numeric {
                    stage: "lstm",
                    epoch,
                    batch: b + 1,
                    loss: mean_loss,
                });
            }
            epoch_loss += batch_loss;

            let inv = 1.0 / batch.len() as f64;
            let mut all: Vec<&mut [f64]> = grads.slices_mut();
            for g in enc_grads.iter_mut() {
                all.push(g.weights.as_mut_slice());
                all.push(g.bias.as_mut_slice());
            }
            for g in all.iter_mut() {
                g.iter_mut().for_each(|v| *v *= inv);
            }
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut all, max);
            }
            drop(all);
            adam.step(clf.params_mut(), &grads.slices())?;
            if let (Some(e), true) = (encoder.as_deref_mut(), fine_tune) {
                let g: Vec<&[f64]> = enc_grads
                    .iter()
                    .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
                    .collect();
                let p: Vec<&mut [f64]> = e.layers_mut()[..ENCODER_DEPTH]
                    .iter_mut()
                    .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
                    .collect();
                enc_adam.step(p, &g)?;
            }
        }
        let n = order.len() as f64;
        let loss = epoch_loss / n;
        let acc = correct as f64 / n;
        debug!("lstm epoch {epoch}: loss {loss:.6} acc {acc:.4}");
        history.push(loss, Some(acc), start.elapsed().as_secs_f64());
    }
    Ok(history)
}

/// Fraction of windows whose prediction matches the label at the window end.
pub fn accuracy(clf: &LstmClassifier, features: &Matrix, labels: &[usize]) -> Result<f64> {
    let preds = predict_table(clf, features)?;
    let ends = window_ends(features.rows(), clf.seq_len);
    let n = preds.len().max(1) as f64;
    Ok(preds.iter().zip(ends).filter(|(p, e)| **p == labels[*e]).count() as f64 / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::{max_rel_error, numeric_gradient};
    use rand::Rng;

    fn random_seq<R: Rng>(rng: &mut R, t: usize, d: usize) -> Matrix {
        Matrix::from_vec(t, d, (0..t * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn small(seed: u64, layers: usize, seq_len: usize) -> LstmClassifier {
        let mut clf = build_classifier_with(
            &ClassifierSpec {
                input_dim: 3,
                units: 4,
                classes: 3,
                layers,
                seq_len,
            },
            seed,
        )
        .unwrap();
        // Non-trivial biases so every gate path carries gradient.
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        for c in &mut clf.cells {
            c.b.iter_mut().for_each(|b| *b += rng.gen_range(-0.5..0.5));
        }
        clf.head.bias.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        clf
    }

    #[test]
    fn zero_cell_hand_values() {
        let cell = LstmCell::zeros(3, 2);
        let (s, cache) = lstm_cell_forward(&cell, &[1.0, -2.0, 3.0], &CellState::zeros(2)).unwrap();
        assert_eq!(&cache.gates[..2], &[0.5, 0.5]);
        assert_eq!(&cache.gates[2..4], &[0.5, 0.5]);
        assert_eq!(&cache.gates[4..6], &[0.0, 0.0]);
        assert_eq!(&cache.gates[6..8], &[0.5, 0.5]);
        assert_eq!(s.c, vec![0.0, 0.0]);
        assert_eq!(s.h, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_cell_decays_memory() {
        let cell = LstmCell::zeros(1, 2);
        let c0 = vec![0.8, -2.0];
        let state = CellState {
            h: vec![0.3, 0.1],
            c: c0.clone(),
        };
        let (s, _) = lstm_cell_forward(&cell, &[0.4], &state).unwrap();
        for k in 0..2 {
            assert_eq!(s.c[k], 0.5 * c0[k]);
            assert_eq!(s.h[k], 0.5 * (0.5 * c0[k]).tanh());
        }
    }

    #[test]
    fn cell_shape_errors() {
        let cell = LstmCell::zeros(3, 2);
        assert!(lstm_cell_forward(&cell, &[1.0], &CellState::zeros(2)).is_err());
        assert!(lstm_cell_forward(&cell, &[1.0; 3], &CellState::zeros(3)).is_err());
    }

    #[test]
    fn gate_codomains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let clf = build_classifier(13, 16, 3, 5);
        let cell = &clf.cells[0];
        let mut state = CellState::zeros(16);
        for _ in 0..50 {
            let x: Vec<f64> = (0..13).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (next, cache) = lstm_cell_forward(cell, &x, &state).unwrap();
            let n = 16;
            for (k, &g) in cache.gates.iter().enumerate() {
                if k / n == 2 {
                    assert!(g > -1.0 && g < 1.0);
                } else {
                    assert!(g > 0.0 && g < 1.0);
                }
            }
            assert!(next.h.iter().all(|h| h.abs() <= 1.0));
            state = next;
        }
    }

    #[test]
    fn default_param_counts() {
        let clf = build_classifier(13, 168, 3, 0);
        let (per, total) = count_params(&clf.layer_specs());
        assert_eq!(per, vec![122304, 507]);
        assert_eq!(total, 122811);
        assert_eq!(clf.cells[0].param_count(), 122304);
        let b = &clf.cells[0].b;
        assert!(b[168..336].iter().all(|&v| v == 1.0));
        assert!(b[..168].iter().chain(&b[336..]).all(|&v| v == 0.0));
        assert!(clf.head.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tiny_param_counts() {
        let clf = build_classifier(1, 1, 2, 0);
        assert_eq!(count_params(&clf.layer_specs()), (vec![12, 4], 16));
    }

    #[test]
    fn same_seed_same_init() {
        assert_eq!(build_classifier(13, 20, 3, 8), build_classifier(13, 20, 3, 8));
        assert_ne!(build_classifier(13, 20, 3, 8), build_classifier(13, 20, 3, 9));
    }

    #[test]
    fn zero_model_is_uniform() {
        let mut clf = build_classifier(13, 8, 3, 1);
        for c in &mut clf.cells {
            *c = LstmCell::zeros(13, 8);
        }
        clf.head.weights.fill(0.0);
        let (p, _) = lstm_forward(&clf, &Matrix::from_vec(1, 13, vec![0.3; 13]).unwrap()).unwrap();
        assert_eq!(p, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn single_step_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let clf = build_classifier(13, 12, 3, 2);
        let seq = random_seq(&mut rng, 1, 13);
        let (p, _) = lstm_forward(&clf, &seq).unwrap();
        let (s, _) = lstm_cell_forward(&clf.cells[0], seq.row(0), &CellState::zeros(12)).unwrap();
        let mut expect = clf.head.forward(&s.h).unwrap();
        assert_eq!(clf.head.activation, Activation::Softmax);
        for (a, b) in p.iter().zip(expect.drain(..)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let clf = small(4, 2, 3);
        for _ in 0..20 {
            let (p, _) = lstm_forward(&clf, &random_seq(&mut rng, 3, 3)).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    fn check_bptt(seed: u64, layers: usize, t: usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut clf = small(seed, layers, t);
        let seq = random_seq(&mut rng, t, 3);
        let class = rng.gen_range(0..3);
        let (_, cache) = lstm_forward(&clf, &seq).unwrap();
        let grads = lstm_backward(&clf, &cache, class).unwrap();
        let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();
        for (k, a) in analytic.iter().enumerate() {
            let mut params = clf.params_mut()[k].to_vec();
            let numeric = numeric_gradient(&mut params, |p| {
                let mut c = clf.clone();
                c.params_mut()[k].copy_from_slice(p);
                let (probs, _) = lstm_forward(&c, &seq).unwrap();
                sparse_cce_loss(&probs, class).unwrap().0
            });
            let err = max_rel_error(a, &numeric);
            assert!(err < 1e-5, "seed {seed} layers {layers} T {t} tensor {k}: {err}");
        }
        // Input gradient, used when fine-tuning the encoder.
        let mut g2 = ClassifierGrads::zeros_like(&clf);
        let (_, dx) = backward_acc(&clf, &cache, class, &mut g2, true).unwrap();
        let dx: Vec<f64> = dx.unwrap().concat();
        let mut xs = seq.as_slice().to_vec();
        let numeric = numeric_gradient(&mut xs, |x| {
            let s = Matrix::from_vec(t, 3, x.to_vec()).unwrap();
            sparse_cce_loss(&lstm_forward(&clf, &s).unwrap().0, class).unwrap().0
        });
        assert!(max_rel_error(&dx, &numeric) < 1e-5);
    }

    #[test]
    fn bptt_matches_finite_differences_single_step() {
        for seed in 0..10 {
            check_bptt(seed, 1, 1);
        }
    }

    #[test]
    fn bptt_matches_finite_differences_three_steps() {
        for seed in 0..10 {
            check_bptt(100 + seed, 1, 3);
        }
    }

    #[test]
    fn bptt_matches_finite_differences_stacked() {
        for seed in 0..5 {
            check_bptt(200 + seed, 2, 3);
        }
    }

    #[test]
    fn one_hot_prediction_has_zero_gradient() {
        let mut clf = small(3, 1, 2);
        // Force probability ~1 on class 1 with a huge head bias.
        clf.head.weights.fill(0.0);
        clf.head.bias = vec![-400.0, 400.0, -400.0];
        let seq = Matrix::from_vec(2, 3, vec![0.1, 0.2, 0.3, -0.1, 0.5, 0.0]).unwrap();
        let (p, cache) = lstm_forward(&clf, &seq).unwrap();
        assert_eq!(p[1], 1.0);
        let g = lstm_backward(&clf, &cache, 1).unwrap();
        for s in g.slices() {
            assert!(s.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn mismatched_cache_rejected() {
        let a = small(1, 1, 1);
        let b = small(1, 2, 1);
        let (_, cache) = lstm_forward(&b, &Matrix::from_vec(1, 3, vec![0.0; 3]).unwrap()).unwrap();
        assert!(matches!(lstm_backward(&a, &cache, 0), Err(Error::Internal(_))));
    }

    #[test]
    fn predict_tie_break_and_argmax() {
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
        assert_eq!(argmax(&[0.5, 0.5, 0.0]), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let clf = build_classifier(13, 10, 3, 6);
        for _ in 0..20 {
            let x: Vec<f64> = (0..13).map(|_| rng.gen_range(0.0..1.0)).collect();
            let (c, p) = predict(&clf, &x).unwrap();
            let (p2, _) = lstm_forward(&clf, &Matrix::from_vec(1, 13, x.clone()).unwrap()).unwrap();
            assert_eq!(p, p2);
            assert_eq!(c, argmax(&p2));
        }
        assert!(predict(&clf, &[0.0; 12]).is_err());
    }

    fn clusters(n_per: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..n_per {
                let row: Vec<f64> = (0..13)
                    .map(|j| {
                        let center = if j % 3 == c { 0.9 } else { 0.1 };
                        center + rng.gen_range(-0.05..0.05)
                    })
                    .collect();
                rows.push(row);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn zero_epochs_is_noop() {
        let (x, y) = clusters(5, 0);
        let mut clf = build_classifier(13, 8, 3, 0);
        let before = clf.clone();
        let cfg = LstmConfig {
            epochs: 0,
            ..Default::default()
        };
        let h = train_classifier(&mut clf, &x, &y, &cfg, None).unwrap();
        assert_eq!(h.epochs_completed(), 0);
        assert_eq!(clf, before);
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = clusters(10, 1);
        let cfg = LstmConfig {
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        };
        let mut a = build_classifier(13, 8, 3, 3);
        let mut b = a.clone();
        let ha = train_classifier(&mut a, &x, &y, &cfg, None).unwrap();
        let hb = train_classifier(&mut b, &x, &y, &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.without_timings(), hb.without_timings());
    }

    #[test]
    fn fine_tuning_updates_encoder_only_when_enabled() {
        let (x, y) = clusters(6, 2);
        let mut sae = crate::sae::build_sae(1);
        let before = sae.clone();
        let mut clf = build_classifier(13, 8, 3, 3);
        let cfg = LstmConfig {
            epochs: 2,
            batch_size: 6,
            fine_tune_encoder: true,
            ..Default::default()
        };
        train_classifier(&mut clf, &x, &y, &cfg, Some(&mut sae)).unwrap();
        assert_ne!(sae.encoder(), before.encoder());
        assert_eq!(sae.decoder(), before.decoder());

        let mut sae2 = before.clone();
        let codes = sae2.encode_table(&x).unwrap();
        let cfg_off = LstmConfig {
            fine_tune_encoder: false,
            ..cfg
        };
        train_classifier(&mut clf, &codes, &y, &cfg_off, Some(&mut sae2)).unwrap();
        assert_eq!(sae2, before);
    }

    #[test]
    fn windows_over_records() {
        assert_eq!(window_ends(5, 1), 0..5);
        assert_eq!(window_ends(5, 3), 2..5);
        assert_eq!(window_ends(2, 3), 2..2);
        let m = Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(window(&m, 3, 2).as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn nan_features_fail_numerically() {
        let (mut x, y) = clusters(4, 0);
        x.set(0, 0, f64::NAN);
        let mut clf = build_classifier(13, 4, 3, 0);
        let cfg = LstmConfig {
            epochs: 1,
            batch_size: 100,
            ..Default::default()
        };
        let err = train_classifier(&mut clf, &x, &y, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::Numeric { stage: "lstm", epoch: 1, batch: 1, .. }));
    }
}
