//! Single-layer LSTM regressor with a scalar linear head.
//!
//! Each gate acts on the concatenation `z = [h_{t-1}, x_t]`:
//!
//! ```text
//! f = sigma(W_f z + b_f)     i = sigma(W_i z + b_i)
//! g = tanh(W_c z + b_c)      o = sigma(W_o z + b_o)
//! c = f * c_prev + i * g     h = tanh(c) * o
//! y = W_y h_last + b_y
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{MinMaxScaler, SequenceDataset};
use crate::matrix::dot;

pub const CLIP_NORM: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Mae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Rmsprop,
    Adam,
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(LossKind::Mse),
            "mae" => Ok(LossKind::Mae),
            other => Err(Error::BadConfig(format!("unknown loss `{other}`"))),
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "rmsprop" => Ok(OptimizerKind::Rmsprop),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::BadConfig(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl OptimizerKind {
    pub fn default_learning_rate(self) -> f64 {
        match self {
            OptimizerKind::Sgd => 0.01,
            OptimizerKind::Rmsprop | OptimizerKind::Adam => 0.001,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub units: usize,
    pub lookback: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: LossKind,
    pub optimizer: OptimizerKind,
    /// Optimizer default when unset.
    #[serde(default)]
    pub learning_rate: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            units: 100,
            lookback: 24,
            epochs: 100,
            batch_size: 32,
            loss: LossKind::Mse,
            optimizer: OptimizerKind::Adam,
            learning_rate: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.units == 0 || self.lookback == 0 || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::BadConfig("units, lookback, epochs and batch_size must be positive".into()));
        }
        if let Some(lr) = self.learning_rate {
            if !(lr > 0.0) {
                return Err(Error::BadConfig(format!("learning rate must be positive, got {lr}")));
            }
        }
        Ok(())
    }

    pub fn lr(&self) -> f64 {
        self.learning_rate.unwrap_or_else(|| self.optimizer.default_learning_rate())
    }
}

/// Weights over `[h, x]` are `units x (units + d)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub units: usize,
    pub n_features: usize,
    pub w_f: Vec<f64>,
    pub w_i: Vec<f64>,
    pub w_c: Vec<f64>,
    pub w_o: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_i: Vec<f64>,
    pub b_c: Vec<f64>,
    pub b_o: Vec<f64>,
    pub w_y: Vec<f64>,
    pub b_y: f64,
}

impl LstmParams {
    pub fn zeros(units: usize, n_features: usize) -> Self {
        let w = vec![0.0; units * (units + n_features)];
        let b = vec![0.0; units];
        Self {
            units,
            n_features,
            w_f: w.clone(),
            w_i: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_f: b.clone(),
            b_i: b.clone(),
            b_c: b.clone(),
            b_o: b.clone(),
            w_y: b,
            b_y: 0.0,
        }
    }

    /// Uniform in `+-1/sqrt(units + d)`, forget-gate bias 1.
    pub fn init<R: Rng>(units: usize, n_features: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(units, n_features);
        let bound = 1.0 / ((units + n_features) as f64).sqrt();
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            for v in w.iter_mut() {
                *v = rng.gen_range(-bound..bound);
            }
        }
        let head = 1.0 / (units as f64).sqrt();
        for v in p.w_y.iter_mut() {
            *v = rng.gen_range(-head..head);
        }
        p.b_f.fill(1.0);
        p
    }

    pub fn width(&self) -> usize {
        self.units + self.n_features
    }

    pub fn tensors(&self) -> [&[f64]; 10] {
        [
            &self.w_f,
            &self.w_i,
            &self.w_c,
            &self.w_o,
            &self.b_f,
            &self.b_i,
            &self.b_c,
            &self.b_o,
            &self.w_y,
            std::slice::from_ref(&self.b_y),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 10] {
        [
            &mut self.w_f,
            &mut self.w_i,
            &mut self.w_c,
            &mut self.w_o,
            &mut self.b_f,
            &mut self.b_i,
            &mut self.b_c,
            &mut self.b_o,
            &mut self.w_y,
            std::slice::from_mut(&mut self.b_y),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    fn add_assign(&mut self, other: &LstmParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    fn norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(units: usize) -> Self {
        Self { h: vec![0.0; units], c: vec![0.0; units] }
    }
}

/// Intermediates of one step kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub z: Vec<f64>,
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub g: Vec<f64>,
    pub o: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceCache {
    pub steps: Vec<StepCache>,
    pub h_last: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn forward_step(params: &LstmParams, state: &LstmState, x: &[f64]) -> Result<(LstmState, StepCache)> {
    let u = params.units;
    if x.len() != params.n_features {
        return Err(Error::ShapeMismatch(format!("input has {} features, model expects {}", x.len(), params.n_features)));
    }
    if state.h.len() != u || state.c.len() != u {
        return Err(Error::ShapeMismatch(format!("state has {} units, model has {u}", state.h.len())));
    }
    let width = params.width();
    let mut z = Vec::with_capacity(width);
    z.extend_from_slice(&state.h);
    z.extend_from_slice(x);

    let gate = |w: &[f64], b: &[f64], act: fn(f64) -> f64| -> Vec<f64> {
        (0..u).map(|k| act(dot(&w[k * width..(k + 1) * width], &z) + b[k])).collect()
    };
    let f = gate(&params.w_f, &params.b_f, sigmoid);
    let i = gate(&params.w_i, &params.b_i, sigmoid);
    let g = gate(&params.w_c, &params.b_c, f64::tanh);
    let o = gate(&params.w_o, &params.b_o, sigmoid);

    let c: Vec<f64> = (0..u).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = (0..u).map(|k| tanh_c[k] * o[k]).collect();
    let cache = StepCache { z, f, i, g, o, c_prev: state.c.clone(), tanh_c };
    Ok((LstmState { h, c }, cache))
}

/// Runs a `lookback x d` window from a zero state and applies the head.
pub fn forward_sequence(params: &LstmParams, window: &[f64]) -> Result<(f64, SequenceCache)> {
    let d = params.n_features;
    if window.is_empty() || d == 0 || window.len() % d != 0 {
        return Err(Error::ShapeMismatch(format!("window of {} values is not a multiple of {d} features", window.len())));
    }
    let mut state = LstmState::zeros(params.units);
    let mut steps = Vec::with_capacity(window.len() / d);
    for x in window.chunks_exact(d) {
        let (next, cache) = forward_step(params, &state, x)?;
        steps.push(cache);
        state = next;
    }
    let y = dot(&params.w_y, &state.h) + params.b_y;
    Ok((y, SequenceCache { steps, h_last: state.h }))
}

/// Prediction only, without keeping caches.
pub fn predict_window(params: &LstmParams, window: &[f64]) -> Result<f64> {
    forward_sequence(params, window).map(|(y, _)| y)
}

/// Gradients of a scalar loss with `dL/dy = d_loss`, by reverse accumulation.
pub fn backward(params: &LstmParams, cache: &SequenceCache, d_loss: f64) -> LstmParams {
    let u = params.units;
    let width = params.width();
    let mut grad = LstmParams::zeros(u, params.n_features);
    grad.b_y = d_loss;
    for k in 0..u {
        grad.w_y[k] = d_loss * cache.h_last[k];
    }
    let mut dh: Vec<f64> = params.w_y.iter().map(|w| w * d_loss).collect();
    let mut dc = vec![0.0; u];
    let mut da = [vec![0.0; u], vec![0.0; u], vec![0.0; u], vec![0.0; u]];

    for step in cache.steps.iter().rev() {
        for k in 0..u {
            let (f, i, g, o, tc) = (step.f[k], step.i[k], step.g[k], step.o[k], step.tanh_c[k]);
            let d_o = dh[k] * tc;
            dc[k] += dh[k] * o * (1.0 - tc * tc);
            let d_f = dc[k] * step.c_prev[k];
            let d_i = dc[k] * g;
            let d_g = dc[k] * i;
            da[0][k] = d_f * f * (1.0 - f);
            da[1][k] = d_i * i * (1.0 - i);
            da[2][k] = d_g * (1.0 - g * g);
            da[3][k] = d_o * o * (1.0 - o);
            dc[k] *= f;
        }
        let mut dz = vec![0.0; width];
        let gates: [(&[f64], &mut Vec<f64>, &mut Vec<f64>); 4] = [
            (&params.w_f, &mut grad.w_f, &mut grad.b_f),
            (&params.w_i, &mut grad.w_i, &mut grad.b_i),
            (&params.w_c, &mut grad.w_c, &mut grad.b_c),
            (&params.w_o, &mut grad.w_o, &mut grad.b_o),
        ];
        for ((w, gw, gb), a) in gates.into_iter().zip(&da) {
            for k in 0..u {
                let ak = a[k];
                if ak == 0.0 {
                    continue;
                }
                gb[k] += ak;
                let row = k * width..(k + 1) * width;
                for ((gwj, wj), (zj, dzj)) in gw[row.clone()].iter_mut().zip(&w[row]).zip(step.z.iter().zip(dz.iter_mut())) {
                    *gwj += ak * zj;
                    *dzj += ak * wj;
                }
            }
        }
        dh.copy_from_slice(&dz[..u]);
    }
    grad
}

/// Optimizer moments; `step` counts updates.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: LstmParams,
    pub v: LstmParams,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, lr: f64, params: &LstmParams) -> Self {
        let zeros = LstmParams::zeros(params.units, params.n_features);
        let (beta2, eps) = match kind {
            OptimizerKind::Rmsprop => (0.9, 1e-7),
            _ => (0.999, 1e-8),
        };
        Self { kind, lr, beta1: 0.9, beta2, eps, step: 0, m: zeros.clone(), v: zeros }
    }

    pub fn update(&mut self, params: &mut LstmParams, grad: &LstmParams) {
        self.step += 1;
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let bc1 = 1.0 - b1.powi(self.step.min(i32::MAX as u64) as i32);
        let bc2 = 1.0 - b2.powi(self.step.min(i32::MAX as u64) as i32);
        let kind = self.kind;
        let tensors = params.tensors_mut().into_iter().zip(grad.tensors()).zip(self.m.tensors_mut()).zip(self.v.tensors_mut());
        for (((p, g), m), v) in tensors {
            for k in 0..p.len() {
                let gk = g[k];
                match kind {
                    OptimizerKind::Sgd => p[k] -= lr * gk,
                    OptimizerKind::Rmsprop => {
                        v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                        p[k] -= lr * gk / (v[k].sqrt() + eps);
                    }
                    OptimizerKind::Adam => {
                        m[k] = b1 * m[k] + (1.0 - b1) * gk;
                        v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
                        p[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Adam step on a single tensor set; see [`OptimizerState::update`].
pub fn adam_update(state: &mut OptimizerState, params: &mut LstmParams, grad: &LstmParams) {
    state.update(params, grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmModel {
    pub params: LstmParams,
    pub config: TrainConfig,
    pub loss_history: Vec<f64>,
    #[serde(default)]
    pub target_scaler: Option<MinMaxScaler>,
}

fn check_dims(params: &LstmParams, seqs: &SequenceDataset) -> Result<()> {
    if seqs.n_features != params.n_features {
        return Err(Error::ShapeMismatch(format!(
            "sequences have {} features, model expects {}",
            seqs.n_features, params.n_features
        )));
    }
    Ok(())
}

/// Mean squared error of the raw outputs over all samples.
pub fn training_mse(params: &LstmParams, seqs: &SequenceDataset) -> Result<f64> {
    check_dims(params, seqs)?;
    let sq = (0..seqs.len())
        .into_par_iter()
        .map(|s| predict_window(params, seqs.window(s)).map(|p| (p - seqs.targets[s]).powi(2)))
        .collect::<Result<Vec<_>>>()?;
    Ok(sq.iter().sum::<f64>() / seqs.len() as f64)
}

pub fn fit(seqs: &SequenceDataset, config: &TrainConfig) -> Result<LstmModel> {
    config.validate()?;
    if seqs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = LstmParams::init(config.units, seqs.n_features, &mut rng);
    let mut opt = OptimizerState::new(config.optimizer, config.lr(), &params);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            // per-sample gradients in parallel, summed in batch order
            let grads: Vec<LstmParams> = batch
                .par_iter()
                .map(|&s| {
                    let (pred, cache) = forward_sequence(&params, seqs.window(s))?;
                    let err = pred - seqs.targets[s];
                    let d = match config.loss {
                        LossKind::Mse => 2.0 * err,
                        LossKind::Mae => {
                            if err > 0.0 {
                                1.0
                            } else if err < 0.0 {
                                -1.0
                            } else {
                                0.0
                            }
                        }
                    };
                    Ok(backward(&params, &cache, d * scale))
                })
                .collect::<Result<_>>()?;
            let mut total = LstmParams::zeros(params.units, params.n_features);
            for g in &grads {
                total.add_assign(g);
            }
            let norm = total.norm();
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            if norm > CLIP_NORM {
                total.scale(CLIP_NORM / norm);
            }
            opt.update(&mut params, &total);
        }
        let mse = training_mse(&params, seqs)?;
        if !mse.is_finite() || !params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(mse);
    }

    Ok(LstmModel { params, config: *config, loss_history: history, target_scaler: None })
}

impl LstmModel {
    pub fn with_target_scaler(mut self, scaler: MinMaxScaler) -> Self {
        self.target_scaler = Some(scaler);
        self
    }

    /// Outputs per window, inverse-scaled when a target scaler is stored.
    pub fn predict(&self, seqs: &SequenceDataset) -> Result<Vec<f64>> {
        check_dims(&self.params, seqs)?;
        let raw = (0..seqs.len())
            .into_par_iter()
            .map(|s| predict_window(&self.params, seqs.window(s)))
            .collect::<Result<Vec<_>>>()?;
        Ok(match &self.target_scaler {
            Some(s) => s.inverse_vector(&raw),
            None => raw,
        })
    }

    /// `(epoch, train_mse)` rows, epochs counted from 1.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse\n");
        for (e, l) in self.loss_history.iter().enumerate() {
            out.push_str(&format!("{},{}\n", e + 1, l));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn zero_params_step() {
        let p = LstmParams::zeros(3, 2);
        let (s, c) = forward_step(&p, &LstmState::zeros(3), &[0.4, -1.0]).unwrap();
        assert!(c.f.iter().chain(&c.i).chain(&c.o).all(|v| *v == 0.5));
        assert!(c.g.iter().all(|v| *v == 0.0));
        assert!(s.c.iter().chain(&s.h).all(|v| *v == 0.0));
    }

    #[test]
    fn hand_evaluated_step() {
        let mut p = LstmParams::zeros(1, 1);
        for w in [&mut p.w_f, &mut p.w_i, &mut p.w_c, &mut p.w_o] {
            w.fill(1.0);
        }
        let (s, c) = forward_step(&p, &LstmState::zeros(1), &[1.0]).unwrap();
        let sig = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((c.f[0] - sig).abs() < 1e-15 && (c.f[0] - 0.7311).abs() < 1e-4);
        assert!((c.g[0] - 0.7616).abs() < 1e-4);
        assert!((s.c[0] - 0.5568).abs() < 1e-4);
        let h = (sig * 1f64.tanh()).tanh() * sig;
        assert!((s.h[0] - h).abs() < 1e-15);
        assert!((s.h[0] - 0.369606).abs() < 1e-6);
    }

    #[test]
    fn shape_errors() {
        let p = LstmParams::zeros(2, 3);
        assert!(matches!(forward_step(&p, &LstmState::zeros(2), &[1.0]), Err(Error::ShapeMismatch(_))));
        assert!(forward_step(&p, &LstmState::zeros(1), &[1.0; 3]).is_err());
        assert!(forward_sequence(&p, &[]).is_err());
        assert!(forward_sequence(&p, &[1.0; 4]).is_err());
    }

    #[test]
    fn zero_params_predict_bias() {
        let mut p = LstmParams::zeros(4, 2);
        p.b_y = 0.25;
        let w = [1.0, 2.0, 3.0, 4.0];
        let (y, _) = forward_sequence(&p, &w).unwrap();
        assert_eq!(y, 0.25);
        // leading zero row changes nothing when the weights vanish
        assert_eq!(predict_window(&p, &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]).unwrap(), y);
    }

    #[test]
    fn lookback_one_is_step_plus_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::init(3, 2, &mut rng);
        let (s, _) = forward_step(&p, &LstmState::zeros(3), &[0.3, 0.9]).unwrap();
        let y = dot(&p.w_y, &s.h) + p.b_y;
        assert_eq!(predict_window(&p, &[0.3, 0.9]).unwrap(), y);
    }

    #[test]
    fn backward_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = LstmParams::init(3, 2, &mut rng);
        let (_, cache) = forward_sequence(&p, &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let g = backward(&p, &cache, 0.0);
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| *v == 0.0)));
        let g = backward(&p, &cache, 0.7);
        assert_eq!(g.b_y, 0.7);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = LstmParams::init(2, 2, &mut rng);
        let before = p.clone();
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 0.01, &p);
        opt.m.b_y = 1.0;
        adam_update(&mut opt, &mut p, &LstmParams::zeros(2, 2));
        assert_eq!(p.w_f, before.w_f);
        assert!((opt.m.b_y - 0.9).abs() < 1e-15);
        assert_eq!(opt.step, 1);
    }

    #[test]
    fn first_adam_step_has_magnitude_lr() {
        let mut p = LstmParams::zeros(1, 1);
        let mut g = LstmParams::zeros(1, 1);
        g.b_y = 3.0;
        g.w_f[0] = -0.002;
        let mut opt = OptimizerState::new(OptimizerKind::Adam, 0.01, &p);
        opt.update(&mut p, &g);
        assert!((p.b_y + 0.01).abs() < 1e-8);
        assert!((p.w_f[0] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn loss_history_length_and_determinism() {
        let rows = Matrix::from_vec(40, 1, (0..40).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let seqs = SequenceDataset::from_rows(&rows, rows.as_slice(), 5).unwrap();
        let cfg = TrainConfig { units: 4, lookback: 5, epochs: 3, batch_size: 8, seed: 11, ..TrainConfig::default() };
        let a = fit(&seqs, &cfg).unwrap();
        let b = fit(&seqs, &cfg).unwrap();
        assert_eq!(a.loss_history.len(), 3);
        assert_eq!(a, b);
        assert_eq!(a.loss_csv().lines().count(), 4);
    }

    #[test]
    fn predict_inverse_scales() {
        let mut p = LstmParams::zeros(2, 1);
        p.b_y = 0.5;
        let model = LstmModel { params: p, config: TrainConfig::default(), loss_history: vec![], target_scaler: None }
            .with_target_scaler(MinMaxScaler { min: vec![10.0], max: vec![30.0] });
        let rows = Matrix::from_vec(6, 1, vec![1.0; 6]).unwrap();
        let seqs = SequenceDataset::from_rows(&rows, &[0.0; 6], 2).unwrap();
        assert_eq!(model.predict(&seqs).unwrap(), vec![20.0; 4]);
        let wrong = SequenceDataset::from_rows(&Matrix::zeros(6, 2), &[0.0; 6], 2).unwrap();
        assert!(matches!(model.predict(&wrong), Err(Error::ShapeMismatch(_))));
    }
}
