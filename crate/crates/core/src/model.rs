//! Two-layer bidirectional LSTM regressor trained by plain gradient descent
//! on the summed squared frame error, with input noise and early stopping.
//!
//! Parameters live in one flat vector so gradients, optimizer state and
//! checkpoints share a layout. Per layer and direction the block is
//! `W (4H x I) | U (4H x H) | b (4H)` with gate order input, forget, cell,
//! output; the head is `w (2H_last) | b (1)`.

use std::io::{Read, Write};

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 1787452436;
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Units per direction, one entry per stacked layer.
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub input_noise_sd: f64,
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub seed: u64,
    /// 0 gives plain gradient descent.
    pub momentum: f64,
    /// Weights start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
    pub forget_bias: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![40, 30],
            learning_rate: 1e-5,
            input_noise_sd: 0.1,
            max_epochs: 100,
            patience_epochs: 10,
            seed: DEFAULT_SEED,
            momentum: 0.0,
            init_range: 0.1,
            forget_bias: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("hidden sizes must be non-empty and positive");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning rate must be positive");
        }
        if !(self.input_noise_sd >= 0.0) {
            return bad("input noise sd must be non-negative");
        }
        if self.max_epochs == 0 || self.patience_epochs == 0 {
            return bad("epochs and patience must be positive");
        }
        if self.patience_epochs > self.max_epochs {
            return bad("patience cannot exceed max epochs");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(self.init_range > 0.0) {
            return bad("init range must be positive");
        }
        Ok(())
    }
}

/// Per-column z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population SD; 1 where the column was constant.
    pub sd: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl Standardizer {
    /// Fit on the rows of every block stacked together.
    pub fn fit<'a>(blocks: impl IntoIterator<Item = ArrayView2<'a, f64>>) -> Result<Self> {
        let blocks: Vec<_> = blocks.into_iter().collect();
        let width = blocks.first().map(|b| b.ncols()).unwrap_or(0);
        let n: usize = blocks.iter().map(|b| b.nrows()).sum();
        if n == 0 {
            return Err(Error::Argument("cannot fit a standardizer on zero rows".into()));
        }
        if let Some(b) = blocks.iter().find(|b| b.ncols() != width) {
            return Err(Error::Shape {
                expected: width,
                got: b.ncols(),
            });
        }
        let mut mean = vec![0.0; width];
        for b in &blocks {
            for row in b.outer_iter() {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; width];
        for b in &blocks {
            for row in b.outer_iter() {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m).powi(2);
                }
            }
        }
        let mut sd = Vec::with_capacity(width);
        let mut degenerate = Vec::with_capacity(width);
        for v in var {
            let s = (v / n as f64).sqrt();
            let flat = !(s > 1e-12);
            degenerate.push(flat);
            sd.push(if flat { 1.0 } else { s });
        }
        Ok(Self { mean, sd, degenerate })
    }

    pub fn fit_values<'a>(series: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let cols: Vec<Array2<f64>> = series
            .into_iter()
            .map(|s| Array2::from_shape_vec((s.len(), 1), s.to_vec()).expect("column"))
            .collect();
        Self::fit(cols.iter().map(|c| c.view()))
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, matrix: ArrayView2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                got: matrix.ncols(),
            });
        }
        let mut out = matrix.to_owned();
        for mut row in out.outer_iter_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.sd) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn invert(&self, matrix: ArrayView2<f64>) -> Result<Array2<f64>> {
        if matrix.ncols() != self.width() {
            return Err(Error::Shape {
                expected: self.width(),
                got: matrix.ncols(),
            });
        }
        let mut out = matrix.to_owned();
        for mut row in out.outer_iter_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.sd) {
                *v = *v * s + m;
            }
        }
        Ok(out)
    }

    /// Single-column helpers for target traces.
    pub fn apply_values(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| (v - self.mean[0]) / self.sd[0]).collect()
    }

    pub fn invert_values(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| v * self.sd[0] + self.mean[0]).collect()
    }
}

/// `matrix` plus independent `N(0, sd^2)` draws, row-major order.
pub fn add_noise(matrix: ArrayView2<f64>, sd: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut out = matrix.to_owned();
    if sd == 0.0 {
        return out;
    }
    let normal = Normal::new(0.0, sd).expect("finite sd");
    out.iter_mut().for_each(|v| *v += normal.sample(rng));
    out
}

/// One subject: a `T x I` input block and `T` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: Array2<f64>,
    pub targets: Vec<f64>,
}

impl Sequence {
    pub fn new(inputs: Array2<f64>, targets: Vec<f64>) -> Result<Self> {
        if inputs.nrows() != targets.len() {
            return Err(Error::Alignment(format!(
                "{} input rows against {} targets",
                inputs.nrows(),
                targets.len()
            )));
        }
        Ok(Self { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
struct DirLayout {
    w: usize,
    u: usize,
    b: usize,
    inputs: usize,
    hidden: usize,
}

/// Network shape plus flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blstm {
    pub n_inputs: usize,
    pub hidden_sizes: Vec<usize>,
    pub params: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Cached activations of one direction over a sequence.
struct DirTrace {
    /// Post-activation gates, `T x 4H`.
    gates: Array2<f64>,
    cells: Array2<f64>,
    hidden: Array2<f64>,
}

struct ForwardTrace {
    /// Input of each layer; entry 0 is the sequence itself.
    layer_inputs: Vec<Array2<f64>>,
    dirs: Vec<[DirTrace; 2]>,
    output: Vec<f64>,
}

impl Blstm {
    pub fn parameter_count(n_inputs: usize, hidden_sizes: &[usize]) -> usize {
        let mut total = 0;
        let mut inputs = n_inputs;
        for &h in hidden_sizes {
            total += 2 * 4 * h * (inputs + h + 1);
            inputs = 2 * h;
        }
        total + inputs + 1
    }

    /// Uniform weights in `[-r, r]` from the seeded generator, forget-gate
    /// biases set to `forget_bias`, other biases zero.
    pub fn new(n_inputs: usize, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if n_inputs == 0 {
            return Err(Error::Argument("model needs at least one input feature".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let n = Self::parameter_count(n_inputs, &config.hidden_sizes);
        let r = config.init_range;
        let mut params: Vec<f64> = (0..n).map(|_| rng.gen_range(-r..=r)).collect();
        let model = Self {
            n_inputs,
            hidden_sizes: config.hidden_sizes.clone(),
            params: Vec::new(),
        };
        for l in 0..model.hidden_sizes.len() {
            for d in 0..2 {
                let lay = model.layout(l, d);
                let h = lay.hidden;
                for k in 0..4 * h {
                    params[lay.b + k] = if (h..2 * h).contains(&k) { config.forget_bias } else { 0.0 };
                }
            }
        }
        let head_b = n - 1;
        params[head_b] = 0.0;
        Ok(Self { params, ..model })
    }

    fn layout(&self, layer: usize, dir: usize) -> DirLayout {
        let mut off = 0;
        let mut inputs = self.n_inputs;
        for (l, &h) in self.hidden_sizes.iter().enumerate() {
            let block = 4 * h * (inputs + h + 1);
            if l == layer {
                let start = off + dir * block;
                return DirLayout {
                    w: start,
                    u: start + 4 * h * inputs,
                    b: start + 4 * h * (inputs + h),
                    inputs,
                    hidden: h,
                };
            }
            off += 2 * block;
            inputs = 2 * h;
        }
        unreachable!("layer index out of range")
    }

    fn head_offset(&self) -> usize {
        self.params.len() - 2 * self.hidden_sizes.last().copied().unwrap_or(0) - 1
    }

    fn check_width(&self, inputs: &Array2<f64>) -> Result<()> {
        if inputs.ncols() != self.n_inputs {
            return Err(Error::Shape {
                expected: self.n_inputs,
                got: inputs.ncols(),
            });
        }
        Ok(())
    }

    fn run_direction(&self, lay: DirLayout, dir: usize, x: &Array2<f64>) -> DirTrace {
        let (t_len, h) = (x.nrows(), lay.hidden);
        let p = &self.params;
        let w = ArrayView2::from_shape((4 * h, lay.inputs), &p[lay.w..lay.u]).expect("W shape");
        let u = &p[lay.u..lay.b];
        let b = ArrayView1::from(&p[lay.b..lay.b + 4 * h]);
        let mut gates = x.dot(&w.t());
        gates += &b;
        let mut cells = Array2::zeros((t_len, h));
        let mut hidden = Array2::zeros((t_len, h));
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut z = vec![0.0; 4 * h];
        for step in 0..t_len {
            let t = if dir == 0 { step } else { t_len - 1 - step };
            let mut g_row = gates.row_mut(t);
            for (k, zk) in z.iter_mut().enumerate() {
                let urow = &u[k * h..(k + 1) * h];
                *zk = g_row[k] + urow.iter().zip(&h_prev).map(|(a, b)| a * b).sum::<f64>();
            }
            for j in 0..h {
                let i_g = sigmoid(z[j]);
                let f_g = sigmoid(z[h + j]);
                let c_g = z[2 * h + j].tanh();
                let o_g = sigmoid(z[3 * h + j]);
                let c = f_g * c_prev[j] + i_g * c_g;
                let hv = o_g * c.tanh();
                g_row[j] = i_g;
                g_row[h + j] = f_g;
                g_row[2 * h + j] = c_g;
                g_row[3 * h + j] = o_g;
                cells[[t, j]] = c;
                hidden[[t, j]] = hv;
                c_prev[j] = c;
                h_prev[j] = hv;
            }
        }
        DirTrace { gates, cells, hidden }
    }

    fn forward_trace(&self, inputs: &Array2<f64>) -> ForwardTrace {
        let mut layer_inputs = vec![inputs.to_owned()];
        let mut dirs = Vec::new();
        for l in 0..self.hidden_sizes.len() {
            let x = &layer_inputs[l];
            let fwd = self.run_direction(self.layout(l, 0), 0, x);
            let bwd = self.run_direction(self.layout(l, 1), 1, x);
            let next = ndarray::concatenate(Axis(1), &[fwd.hidden.view(), bwd.hidden.view()]).expect("same rows");
            dirs.push([fwd, bwd]);
            layer_inputs.push(next);
        }
        let top = layer_inputs.last().expect("at least the input");
        let head = self.head_offset();
        let w = ArrayView1::from(&self.params[head..self.params.len() - 1]);
        let bias = self.params[self.params.len() - 1];
        let output = top.dot(&w).iter().map(|v| v + bias).collect();
        ForwardTrace {
            layer_inputs,
            dirs,
            output,
        }
    }

    /// Standardized-scale outputs, one per input row.
    pub fn forward(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        self.check_width(inputs)?;
        if inputs.nrows() == 0 {
            return Ok(Vec::new());
        }
        Ok(self.forward_trace(inputs).output)
    }

    /// Backpropagate one direction; accumulates into `grad`, returns the
    /// gradient with respect to the layer input.
    fn backward_direction(
        &self,
        lay: DirLayout,
        dir: usize,
        x: &Array2<f64>,
        trace: &DirTrace,
        d_hidden: ArrayView2<f64>,
        grad: &mut [f64],
    ) -> Array2<f64> {
        let (t_len, h) = (x.nrows(), lay.hidden);
        let u = &self.params[lay.u..lay.b];
        let mut dz = Array2::<f64>::zeros((t_len, 4 * h));
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dh = vec![0.0; h];
        for step in (0..t_len).rev() {
            let t = if dir == 0 { step } else { t_len - 1 - step };
            let prev = if step == 0 {
                None
            } else if dir == 0 {
                Some(t - 1)
            } else {
                Some(t + 1)
            };
            let g = trace.gates.row(t);
            let mut dz_row = dz.row_mut(t);
            for j in 0..h {
                dh[j] = d_hidden[[t, j]] + dh_next[j];
                let (i_g, f_g, c_g, o_g) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = trace.cells[[t, j]].tanh();
                let c_prev = prev.map_or(0.0, |p| trace.cells[[p, j]]);
                let dc = dh[j] * o_g * (1.0 - tc * tc) + dc_next[j];
                dz_row[j] = dc * c_g * i_g * (1.0 - i_g);
                dz_row[h + j] = dc * c_prev * f_g * (1.0 - f_g);
                dz_row[2 * h + j] = dc * i_g * (1.0 - c_g * c_g);
                dz_row[3 * h + j] = dh[j] * tc * o_g * (1.0 - o_g);
                dc_next[j] = dc * f_g;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            for k in 0..4 * h {
                let dzk = dz_row[k];
                if dzk == 0.0 {
                    continue;
                }
                let urow = &u[k * h..(k + 1) * h];
                for j in 0..h {
                    dh_next[j] += urow[j] * dzk;
                }
                if let Some(p) = prev {
                    let hp = trace.hidden.row(p);
                    let gu = &mut grad[lay.u + k * h..lay.u + (k + 1) * h];
                    for j in 0..h {
                        gu[j] += dzk * hp[j];
                    }
                }
            }
        }
        let dw = dz.t().dot(x);
        for (g, v) in grad[lay.w..lay.u].iter_mut().zip(dw.iter()) {
            *g += v;
        }
        let db = dz.sum_axis(Axis(0));
        for (g, v) in grad[lay.b..lay.b + 4 * h].iter_mut().zip(db.iter()) {
            *g += v;
        }
        let w = ArrayView2::from_shape((4 * h, lay.inputs), &self.params[lay.w..lay.u]).expect("W shape");
        dz.dot(&w)
    }

    /// Loss and gradient of one sequence added into `grad`.
    fn accumulate(&self, seq: &Sequence, grad: &mut [f64]) -> Result<f64> {
        self.check_width(&seq.inputs)?;
        if seq.is_empty() {
            return Ok(0.0);
        }
        let trace = self.forward_trace(&seq.inputs);
        let residual: Vec<f64> = trace.output.iter().zip(&seq.targets).map(|(p, y)| p - y).collect();
        let loss = residual.iter().map(|r| r * r).sum();
        let d_out = Array1::from_iter(residual.iter().map(|r| 2.0 * r));

        let head = self.head_offset();
        let n = self.params.len();
        let top = trace.layer_inputs.last().expect("top");
        let dw = top.t().dot(&d_out);
        for (g, v) in grad[head..n - 1].iter_mut().zip(dw.iter()) {
            *g += v;
        }
        grad[n - 1] += d_out.sum();

        let w_head = ArrayView1::from(&self.params[head..n - 1]);
        let mut d_layer = d_out
            .view()
            .insert_axis(Axis(1))
            .dot(&w_head.insert_axis(Axis(0)));
        for l in (0..self.hidden_sizes.len()).rev() {
            let h = self.hidden_sizes[l];
            let x = &trace.layer_inputs[l];
            let [fwd, bwd] = &trace.dirs[l];
            let dx_f = self.backward_direction(self.layout(l, 0), 0, x, fwd, d_layer.slice(s![.., ..h]), grad);
            let dx_b = self.backward_direction(self.layout(l, 1), 1, x, bwd, d_layer.slice(s![.., h..]), grad);
            d_layer = dx_f + dx_b;
        }
        Ok(loss)
    }

    /// Summed squared error over `batch` and its gradient with respect to
    /// every parameter.
    pub fn gradients(&self, batch: &[Sequence]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        for seq in batch {
            loss += self.accumulate(seq, &mut grad)?;
        }
        Ok((loss, grad))
    }

    pub fn loss(&self, batch: &[Sequence]) -> Result<f64> {
        let mut loss = 0.0;
        for seq in batch {
            let out = self.forward(&seq.inputs)?;
            loss += out.iter().zip(&seq.targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>();
        }
        Ok(loss)
    }
}

/// Stops after `patience` epochs without a strictly lower validation SSE.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    /// Record an epoch; returns true when it is the new best.
    pub fn observe(&mut self, epoch: usize, value: f64) -> bool {
        if value < self.best {
            self.best = value;
            self.best_epoch = epoch;
            self.stale = 0;
            true
        } else {
            self.stale += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.stale >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean squared frame error on the noisy training inputs.
    pub train_mse: f64,
    /// Mean squared frame error on validation (standardized scale).
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Training {
    pub model: Blstm,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
}

fn frames(batch: &[Sequence]) -> usize {
    batch.iter().map(Sequence::len).sum()
}

/// Gradient descent with one step per training sequence in fixed order,
/// fresh input noise every epoch, and early stopping on validation error.
/// When `val` is empty the clean training error drives early stopping.
pub fn train_blstm(train: &[Sequence], val: &[Sequence], config: &ModelConfig) -> Result<Training> {
    config.validate()?;
    let first = train
        .iter()
        .find(|s| !s.is_empty())
        .ok_or_else(|| Error::Argument("empty training set".into()))?;
    let model = Blstm::new(first.inputs.ncols(), config)?;
    train_from(model, train, val, config)
}

/// As [`train_blstm`] but starting from given parameters.
pub fn train_from(mut model: Blstm, train: &[Sequence], val: &[Sequence], config: &ModelConfig) -> Result<Training> {
    config.validate()?;
    if frames(train) == 0 {
        return Err(Error::Argument("empty training set".into()));
    }
    // noise stream is separate from the initialization stream
    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut velocity = vec![0.0; model.params.len()];
    let mut stopper = EarlyStopper::new(config.patience_epochs);
    let mut best = model.clone();
    let mut history = Vec::new();
    let monitor = if frames(val) > 0 { val } else { train };

    for epoch in 1..=config.max_epochs {
        let mut train_loss = 0.0;
        for seq in train.iter().filter(|s| !s.is_empty()) {
            let noisy = Sequence {
                inputs: add_noise(seq.inputs.view(), config.input_noise_sd, &mut noise_rng),
                targets: seq.targets.clone(),
            };
            let (loss, grad) = model.gradients(std::slice::from_ref(&noisy))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            train_loss += loss;
            for ((p, v), g) in model.params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = config.momentum * *v - config.learning_rate * g;
                *p += *v;
            }
        }
        let val_mse = model.loss(monitor)? / frames(monitor) as f64;
        if !val_mse.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        history.push(EpochRecord {
            epoch,
            train_mse: train_loss / frames(train) as f64,
            val_mse,
        });
        log::debug!("epoch {epoch}: train {:.5} val {:.5}", train_loss / frames(train) as f64, val_mse);
        if stopper.observe(epoch, val_mse) {
            best = model.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }
    Ok(Training {
        model: best,
        history,
        best_epoch: stopper.best_epoch(),
    })
}

/// A trained network with its scaling and the columns it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: ModelConfig,
    pub catalog_hash: String,
    pub feature_names: Vec<String>,
    pub input_scaler: Standardizer,
    pub target_scaler: Standardizer,
    /// Annotation delay the model was trained with, seconds.
    pub shift_s: f64,
    pub best_epoch: usize,
    pub model: Blstm,
}

impl Checkpoint {
    /// De-standardized per-frame prediction for raw feature rows.
    pub fn predict(&self, raw: &Array2<f64>) -> Result<Vec<f64>> {
        let z = self.input_scaler.apply(raw.view())?;
        let out = self.model.forward(&z)?;
        Ok(self.target_scaler.invert_values(&out))
    }

    pub fn write<W: Write>(&self, output: W) -> Result<()> {
        serde_json::to_writer_pretty(output, self)?;
        Ok(())
    }

    /// Load, refusing files from another format version or trained on a
    /// different column set.
    pub fn read<R: Read>(input: R, expected_catalog_hash: Option<&str>) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_reader(input)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if let Some(h) = expected_catalog_hash {
            if h != ck.catalog_hash {
                return Err(Error::Checkpoint(format!(
                    "catalog hash mismatch: checkpoint {} vs features {h}",
                    ck.catalog_hash
                )));
            }
        }
        let want = Blstm::parameter_count(ck.model.n_inputs, &ck.model.hidden_sizes);
        if ck.model.params.len() != want {
            return Err(Error::Checkpoint(format!(
                "expected {want} parameters, found {}",
                ck.model.params.len()
            )));
        }
        Ok(ck)
    }
}
