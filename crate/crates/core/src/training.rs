//! Linearized classifier head over propagated embeddings: factored linear
//! blocks with inverted dropout, softmax cross-entropy, analytic gradients,
//! Adam, and accuracy evaluation.
//!
//! The end-to-end map is a plain matrix product; softmax lives inside the
//! loss. Parameters stay factored per block so dropout can sit between
//! blocks and aggregation can average block-by-block.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("matrix dimensions do not chain: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mask selects no nodes")]
    EmptyMask,
    #[error("parameter, gradient, and moment shapes must agree")]
    ShapeMismatch,
}

/// Factored linear parameter blocks; block i maps dims\[i\] -> dims\[i+1\].
/// No bias terms.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierParams {
    pub blocks: Vec<Array2<f64>>,
}

impl ClassifierParams {
    /// Uniform init in +-sqrt(6/(fan_in+fan_out)) per block, seeded.
    pub fn xavier(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need at least one block");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = dims
            .windows(2)
            .map(|w| {
                let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
                Array2::from_shape_fn((w[0], w[1]), |_| rng.random_range(-bound..bound))
            })
            .collect();
        ClassifierParams { blocks }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        assert!(dims.len() >= 2);
        ClassifierParams {
            blocks: dims
                .windows(2)
                .map(|w| Array2::zeros((w[0], w[1])))
                .collect(),
        }
    }

    /// Chained dimensions [input, hidden..., output].
    pub fn dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.blocks.iter().map(|b| b.nrows()).collect();
        dims.push(self.blocks.last().expect("nonempty").ncols());
        dims
    }
}

/// Adam moment estimates, one pair per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first: Vec<Array2<f64>>,
    pub second: Vec<Array2<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ClassifierParams) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .blocks
            .iter()
            .map(|b| Array2::zeros(b.raw_dim()))
            .collect();
        AdamState {
            first: zeros.clone(),
            second: zeros,
            step: 0,
        }
    }
}

/// Knobs for local training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub dropout_rate: f64,
    pub hidden_dim: usize,
    pub rounds: usize,
    pub local_iters: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            dropout_rate: 0.5,
            hidden_dim: 16,
            rounds: 150,
            local_iters: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) {
        assert!(
            (0.0..1.0).contains(&self.dropout_rate),
            "dropout rate must lie in [0, 1)"
        );
        assert!(self.learning_rate > 0.0);
    }
}

/// Draws inverted-dropout masks: entries are 0 with probability `rate`,
/// otherwise 1/(1-rate), so the masked forward is unbiased and evaluation
/// needs no rescaling.
#[derive(Debug, Clone)]
pub struct DropoutSampler {
    rng: ChaCha8Rng,
    rate: f64,
}

impl DropoutSampler {
    pub fn new(rate: f64, seed: u64) -> Self {
        assert!((0.0..1.0).contains(&rate));
        DropoutSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            rate,
        }
    }

    pub fn sample(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        if self.rate == 0.0 {
            return Array2::ones((rows, cols));
        }
        let scale = 1.0 / (1.0 - self.rate);
        Array2::from_shape_fn((rows, cols), |_| {
            if self.rng.random::<f64>() < self.rate {
                0.0
            } else {
                scale
            }
        })
    }
}

fn check_masks(
    x: &Array2<f64>,
    params: &ClassifierParams,
    masks: Option<&[Array2<f64>]>,
) -> Result<(), TrainError> {
    let dims = params.dims();
    if x.ncols() != dims[0] {
        return Err(TrainError::DimensionMismatch {
            expected: dims[0],
            got: x.ncols(),
        });
    }
    if let Some(ms) = masks {
        if ms.len() != params.blocks.len() {
            return Err(TrainError::ShapeMismatch);
        }
        for (i, m) in ms.iter().enumerate() {
            if m.nrows() != x.nrows() || m.ncols() != dims[i] {
                return Err(TrainError::ShapeMismatch);
            }
        }
    }
    Ok(())
}

/// Logits for each row of `x`: the chained product through every block,
/// with the matching dropout mask applied to each block's input when masks
/// are supplied (train time). No nonlinearity anywhere; softmax is folded
/// into the loss.
pub fn forward(
    x: &Array2<f64>,
    params: &ClassifierParams,
    masks: Option<&[Array2<f64>]>,
) -> Result<Array2<f64>, TrainError> {
    check_masks(x, params, masks)?;
    let mut h = x.to_owned();
    for (i, block) in params.blocks.iter().enumerate() {
        if let Some(ms) = masks {
            h = &h * &ms[i];
        }
        h = h.dot(block);
    }
    Ok(h)
}

/// Row-wise softmax with max-subtraction.
fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
    out
}

/// Mean over masked rows of -log softmax(logits)\[label\].
pub fn cross_entropy_loss(
    logits: &Array2<f64>,
    labels: &[usize],
    mask: &[bool],
) -> Result<f64, TrainError> {
    assert_eq!(logits.nrows(), labels.len());
    assert_eq!(logits.nrows(), mask.len());
    let mut total = 0.0;
    let mut count = 0usize;
    for (v, row) in logits.rows().into_iter().enumerate() {
        if !mask[v] {
            continue;
        }
        let label = labels[v];
        assert!(label < logits.ncols(), "label out of range");
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let logsumexp = row.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        total += logsumexp - row[label];
        count += 1;
    }
    if count == 0 {
        return Err(TrainError::EmptyMask);
    }
    Ok(total / count as f64)
}

/// Loss together with analytic gradients of the masked mean cross-entropy
/// with respect to every block. Rows outside the mask contribute nothing.
pub fn loss_and_gradients(
    x: &Array2<f64>,
    params: &ClassifierParams,
    labels: &[usize],
    mask: &[bool],
    dropout_masks: Option<&[Array2<f64>]>,
) -> Result<(f64, Vec<Array2<f64>>), TrainError> {
    check_masks(x, params, dropout_masks)?;
    assert_eq!(x.nrows(), labels.len());
    assert_eq!(x.nrows(), mask.len());
    let rows: Vec<usize> = (0..x.nrows()).filter(|&v| mask[v]).collect();
    if rows.is_empty() {
        return Err(TrainError::EmptyMask);
    }
    let m = rows.len() as f64;

    // compact to masked rows: unmasked rows have zero gradient by definition
    let xm = x.select(Axis(0), &rows);
    let compact_masks: Option<Vec<Array2<f64>>> =
        dropout_masks.map(|ms| ms.iter().map(|mk| mk.select(Axis(0), &rows)).collect());

    let n_blocks = params.blocks.len();
    let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_blocks);
    let mut h = xm;
    for (i, block) in params.blocks.iter().enumerate() {
        if let Some(ms) = &compact_masks {
            h = &h * &ms[i];
        }
        acts.push(h.clone());
        h = h.dot(block);
    }
    let logits = h;

    let compact_labels: Vec<usize> = rows.iter().map(|&v| labels[v]).collect();
    let loss = cross_entropy_loss(&logits, &compact_labels, &vec![true; rows.len()])?;

    // d(loss)/d(logits) = (softmax - onehot) / m on masked rows
    let mut g = softmax_rows(&logits);
    for (r, &label) in compact_labels.iter().enumerate() {
        g[[r, label]] -= 1.0;
    }
    g.mapv_inplace(|v| v / m);

    let mut grads = vec![Array2::zeros((0, 0)); n_blocks];
    for i in (0..n_blocks).rev() {
        grads[i] = acts[i].t().dot(&g);
        if i > 0 {
            g = g.dot(&params.blocks[i].t());
            if let Some(ms) = &compact_masks {
                g = &g * &ms[i];
            }
        }
    }
    Ok((loss, grads))
}

/// Analytic gradients alone; see [`loss_and_gradients`].
pub fn gradients(
    x: &Array2<f64>,
    params: &ClassifierParams,
    labels: &[usize],
    mask: &[bool],
    dropout_masks: Option<&[Array2<f64>]>,
) -> Result<Vec<Array2<f64>>, TrainError> {
    loss_and_gradients(x, params, labels, mask, dropout_masks).map(|(_, g)| g)
}

/// One Adam update with bias correction, in place.
pub fn adam_step(
    params: &mut ClassifierParams,
    grads: &[Array2<f64>],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), TrainError> {
    if grads.len() != params.blocks.len() || state.first.len() != params.blocks.len() {
        return Err(TrainError::ShapeMismatch);
    }
    for ((block, grad), (m, v)) in params
        .blocks
        .iter()
        .zip(grads)
        .zip(state.first.iter().zip(&state.second))
    {
        if block.raw_dim() != grad.raw_dim()
            || block.raw_dim() != m.raw_dim()
            || block.raw_dim() != v.raw_dim()
        {
            return Err(TrainError::ShapeMismatch);
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, g) in grads.iter().enumerate() {
        state.first[i] = &state.first[i] * ADAM_BETA1 + &(g * (1.0 - ADAM_BETA1));
        state.second[i] = &state.second[i] * ADAM_BETA2 + &(g.mapv(|x| x * x) * (1.0 - ADAM_BETA2));
        let m_hat = &state.first[i] / c1;
        let v_hat = &state.second[i] / c2;
        let update = &m_hat / &(v_hat.mapv(f64::sqrt) + ADAM_EPSILON);
        params.blocks[i] = &params.blocks[i] - &(update * lr);
    }
    Ok(())
}

/// Fraction of masked rows whose argmax logit matches the label; ties go to
/// the lowest class index.
pub fn evaluate(
    params: &ClassifierParams,
    x: &Array2<f64>,
    labels: &[usize],
    mask: &[bool],
) -> Result<f64, TrainError> {
    let logits = forward(x, params, None)?;
    let (correct, total) = count_correct(&logits, labels, mask);
    if total == 0 {
        return Err(TrainError::EmptyMask);
    }
    Ok(correct as f64 / total as f64)
}

/// Correct and total counts over masked rows, for pooling across clients.
pub fn count_correct(logits: &Array2<f64>, labels: &[usize], mask: &[bool]) -> (usize, usize) {
    assert_eq!(logits.nrows(), labels.len());
    assert_eq!(logits.nrows(), mask.len());
    let mut correct = 0usize;
    let mut total = 0usize;
    for (v, row) in logits.rows().into_iter().enumerate() {
        if !mask[v] {
            continue;
        }
        let mut best = 0usize;
        for (c, &z) in row.iter().enumerate() {
            if z > row[best] {
                best = c;
            }
        }
        if best == labels[v] {
            correct += 1;
        }
        total += 1;
    }
    (correct, total)
}

/// Full-batch local trainer over a client's training rows. Owns the model
/// and Adam moments; the moments persist across aggregation rounds while
/// the parameters get replaced by each broadcast.
#[derive(Debug, Clone)]
pub struct LocalTrainer {
    pub params: ClassifierParams,
    pub adam: AdamState,
    pub learning_rate: f64,
    dropout: DropoutSampler,
    x_train: Array2<f64>,
    labels: Vec<usize>,
    mask_all: Vec<bool>,
}

impl LocalTrainer {
    /// `x_train` holds only the training rows; `labels` aligns with them.
    pub fn new(
        params: ClassifierParams,
        x_train: Array2<f64>,
        labels: Vec<usize>,
        config: &TrainConfig,
        dropout_seed: u64,
    ) -> Self {
        assert_eq!(x_train.nrows(), labels.len());
        let adam = AdamState::new(&params);
        let mask_all = vec![true; labels.len()];
        LocalTrainer {
            params,
            adam,
            learning_rate: config.learning_rate,
            dropout: DropoutSampler::new(config.dropout_rate, dropout_seed),
            x_train,
            labels,
            mask_all,
        }
    }

    pub fn num_train_rows(&self) -> usize {
        self.labels.len()
    }

    /// Replace the model with a broadcast copy; Adam moments are kept.
    pub fn receive_params(&mut self, params: ClassifierParams) {
        self.params = params;
    }

    /// Cross-entropy of the current model over the training rows, without
    /// dropout: the deterministic per-round loss metric.
    pub fn train_loss(&self) -> Result<f64, TrainError> {
        let logits = forward(&self.x_train, &self.params, None)?;
        cross_entropy_loss(&logits, &self.labels, &self.mask_all)
    }

    /// Run `iters` full-batch steps, resampling dropout each step. Returns
    /// the per-step losses, each measured with that step's dropout draw
    /// before its update. A trainer with no rows is a no-op reporting zeros.
    pub fn train_iters(&mut self, iters: usize) -> Result<Vec<f64>, TrainError> {
        let mut losses = Vec::with_capacity(iters);
        if self.labels.is_empty() {
            losses.resize(iters, 0.0);
            return Ok(losses);
        }
        let dims = self.params.dims();
        let rows = self.x_train.nrows();
        for _ in 0..iters {
            let masks: Vec<Array2<f64>> = dims[..dims.len() - 1]
                .iter()
                .map(|&d| self.dropout.sample(rows, d))
                .collect();
            let (loss, grads) = loss_and_gradients(
                &self.x_train,
                &self.params,
                &self.labels,
                &self.mask_all,
                Some(&masks),
            )?;
            adam_step(&mut self.params, &grads, &mut self.adam, self.learning_rate)?;
            losses.push(loss);
        }
        Ok(losses)
    }
}
