//! Single-hidden-layer perceptron trained by full-batch gradient descent.
//!
//! `f(x) = b2 + sum_k w2[k] * tanh(b1[k] + W1[k] . z)` with `z` the
//! standardized input. The loss is the mean squared error. A step that
//! would increase the loss is rejected and the step size halved; accepted
//! steps grow it by 10%, so the recorded loss sequence never increases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DmlError, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    #[serde(default = "MlpConfig::default_hidden")]
    pub hidden: usize,
    #[serde(default = "MlpConfig::default_epochs")]
    pub epochs: usize,
    #[serde(default = "MlpConfig::default_step")]
    pub step_size: f64,
}

impl MlpConfig {
    fn default_hidden() -> usize {
        8
    }
    fn default_epochs() -> usize {
        2000
    }
    fn default_step() -> f64 {
        0.5
    }
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: Self::default_hidden(), epochs: Self::default_epochs(), step_size: Self::default_step() }
    }
}

/// Network shape; parameters live in a flat vector laid out as
/// `[W1 (hidden x inputs, row-major), b1, w2, b2]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden: usize,
}

impl MlpShape {
    pub fn n_params(&self) -> usize {
        self.hidden * self.inputs + 2 * self.hidden + 1
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let b1 = self.hidden * self.inputs;
        let w2 = b1 + self.hidden;
        (b1, w2, w2 + self.hidden)
    }

    pub fn forward(&self, params: &[f64], z: &[f64]) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let mut out = params[b2];
        for k in 0..self.hidden {
            let w = &params[k * self.inputs..(k + 1) * self.inputs];
            let pre = params[b1 + k] + w.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            out += params[w2 + k] * pre.tanh();
        }
        out
    }

    pub fn loss(&self, params: &[f64], z: &Matrix, y: &[f64]) -> f64 {
        (0..y.len()).map(|i| (self.forward(params, z.row(i)) - y[i]).powi(2)).sum::<f64>() / y.len() as f64
    }

    /// Mean squared error and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, params: &[f64], z: &Matrix, y: &[f64]) -> (f64, Vec<f64>) {
        let (b1, w2, b2) = self.offsets();
        let n = y.len() as f64;
        let mut grad = vec![0.0; self.n_params()];
        let mut loss = 0.0;
        let mut act = vec![0.0; self.hidden];
        for i in 0..y.len() {
            let zi = z.row(i);
            let mut out = params[b2];
            for k in 0..self.hidden {
                let w = &params[k * self.inputs..(k + 1) * self.inputs];
                act[k] = (params[b1 + k] + w.iter().zip(zi).map(|(a, b)| a * b).sum::<f64>()).tanh();
                out += params[w2 + k] * act[k];
            }
            let r = out - y[i];
            loss += r * r;
            let g_out = 2.0 * r / n;
            grad[b2] += g_out;
            for k in 0..self.hidden {
                grad[w2 + k] += g_out * act[k];
                let g_pre = g_out * params[w2 + k] * (1.0 - act[k] * act[k]);
                grad[b1 + k] += g_pre;
                let gw = &mut grad[k * self.inputs..(k + 1) * self.inputs];
                for (g, a) in gw.iter_mut().zip(zi) {
                    *g += g_pre * a;
                }
            }
        }
        (loss / n, grad)
    }

    /// Random hidden layer, zero output weights and output bias at `y_mean`.
    pub fn init(&self, y_mean: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (self.inputs.max(1) as f64).sqrt();
        let (b1, _, b2) = self.offsets();
        let mut params = vec![0.0; self.n_params()];
        for p in &mut params[..b1] {
            *p = rng.random_range(-scale..scale);
        }
        params[b2] = y_mean;
        params
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    shape: MlpShape,
    params: Vec<f64>,
    in_mean: Vec<f64>,
    in_sd: Vec<f64>,
    loss_history: Vec<f64>,
}

impl Mlp {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let z: Vec<f64> = row.iter().zip(&self.in_mean).zip(&self.in_sd).map(|((a, m), s)| (a - m) / s).collect();
        self.shape.forward(&self.params, &z)
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Training loss after initialization and after every accepted step.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }
}

fn standardize_inputs(x: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut sds = Vec::with_capacity(x.cols());
    for j in 0..x.cols() {
        let c = x.column(j);
        let m = c.iter().sum::<f64>() / n;
        let sd = (c.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n).sqrt();
        means.push(m);
        sds.push(if sd > 1e-12 { sd } else { 1.0 });
    }
    let mut z = x.clone();
    for i in 0..z.rows() {
        for (j, a) in z.row_mut(i).iter_mut().enumerate() {
            *a = (*a - means[j]) / sds[j];
        }
    }
    (z, means, sds)
}

pub fn fit_mlp(x: &Matrix, y: &[f64], config: &MlpConfig, seed: u64) -> Result<Mlp> {
    assert_eq!(x.rows(), y.len());
    if y.len() < 2 {
        return Err(DmlError::InvalidArgument("neural network needs at least two rows".into()));
    }
    let shape = MlpShape { inputs: x.cols(), hidden: config.hidden.max(1) };
    let (z, in_mean, in_sd) = standardize_inputs(x);
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut params = shape.init(y_mean, seed);

    let (mut loss, mut grad) = shape.loss_and_gradient(&params, &z, y);
    if !loss.is_finite() {
        return Err(DmlError::TrainingDiverged { epoch: 0 });
    }
    let mut history = vec![loss];
    let mut step = config.step_size;
    let mut candidate = vec![0.0; params.len()];
    'epochs: for _ in 0..config.epochs {
        if grad.iter().all(|&g| g == 0.0) {
            break;
        }
        loop {
            for ((c, p), g) in candidate.iter_mut().zip(&params).zip(&grad) {
                *c = p - step * g;
            }
            let (new_loss, new_grad) = shape.loss_and_gradient(&candidate, &z, y);
            if new_loss.is_finite() && new_loss <= loss {
                std::mem::swap(&mut params, &mut candidate);
                loss = new_loss;
                grad = new_grad;
                history.push(loss);
                step *= 1.1;
                break;
            }
            step *= 0.5;
            if step < 1e-14 {
                break 'epochs;
            }
        }
    }
    if !loss.is_finite() {
        return Err(DmlError::TrainingDiverged { epoch: history.len() });
    }
    Ok(Mlp { shape, params, in_mean, in_sd, loss_history: history })
}
