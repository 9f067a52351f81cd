//! Surrogate loss predictor: a 7-64-64-1 tanh network.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::diffusion::Point;
use crate::classifier::HYPER_DIM;
use crate::error::{Error, Result};

pub const HIDDEN: usize = 64;

const W1: usize = 0;
const B1: usize = W1 + HIDDEN * HYPER_DIM;
const W2: usize = B1 + HIDDEN;
const B2: usize = W2 + HIDDEN * HIDDEN;
const W3: usize = B2 + HIDDEN;
const B3: usize = W3 + HIDDEN;
/// Total parameter count.
pub const PARAMS: usize = B3 + 1;
const WD: f64 = 3e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalNet {
    /// Flat parameters: W1 (row-major, 64x7), b1, W2 (64x64), b2, w3, b3.
    pub params: Vec<f64>,
    velocity: Vec<f64>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// L2 penalty on weights (not biases), applied in the update step.
    pub weight_decay: f64,
    pub steps_taken: usize,
    /// Targets are standardized during training; predictions undo it.
    pub target_mean: f64,
    pub target_scale: f64,
    /// Mean squared error over the training samples after the last epoch,
    /// in target units.
    pub training_mse: f64,
}

fn is_bias(i: usize) -> bool {
    (B1..W2).contains(&i) || (B2..W3).contains(&i) || i == B3
}

struct Activations {
    h1: [f64; HIDDEN],
    h2: [f64; HIDDEN],
    out: f64,
}

fn input(x: &Point) -> Point {
    std::array::from_fn(|i| 2.0 * x[i] - 1.0)
}

impl EvalNet {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; PARAMS];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.random_range(-a..a);
            }
        };
        fill(W1..B1, HYPER_DIM, HIDDEN);
        fill(W2..B2, HIDDEN, HIDDEN);
        // the output layer starts at zero so an untrained net predicts the target mean
        EvalNet {
            params,
            velocity: vec![0.0; PARAMS],
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 4,
            weight_decay: WD,
            steps_taken: 0,
            target_mean: 0.0,
            target_scale: 1.0,
            training_mse: f64::NAN,
        }
    }

    fn forward(&self, x: &Point) -> Activations {
        let p = &self.params;
        let x = input(x);
        let mut h1 = [0.0; HIDDEN];
        for (j, h) in h1.iter_mut().enumerate() {
            let row = &p[W1 + j * HYPER_DIM..W1 + (j + 1) * HYPER_DIM];
            *h = (p[B1 + j] + row.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()).tanh();
        }
        let mut h2 = [0.0; HIDDEN];
        for (j, h) in h2.iter_mut().enumerate() {
            let row = &p[W2 + j * HIDDEN..W2 + (j + 1) * HIDDEN];
            *h = (p[B2 + j] + row.iter().zip(&h1).map(|(w, v)| w * v).sum::<f64>()).tanh();
        }
        let out = p[B3] + p[W3..B3].iter().zip(&h2).map(|(w, v)| w * v).sum::<f64>();
        Activations { h1, h2, out }
    }

    /// Output before target de-standardization.
    pub fn raw_output(&self, x: &Point) -> f64 {
        self.forward(x).out
    }

    /// Predicted loss at a normalized point.
    pub fn predict(&self, x: &Point) -> f64 {
        self.target_mean + self.target_scale * self.raw_output(x)
    }

    /// Mean squared error of the raw output against `targets`, and its
    /// gradient with respect to every parameter.
    pub fn mse_and_gradient(&self, xs: &[Point], targets: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; PARAMS];
        let mut loss = 0.0;
        let n = xs.len() as f64;
        let p = &self.params;
        for (x, &t) in xs.iter().zip(targets) {
            let a = self.forward(x);
            let err = a.out - t;
            loss += err * err / n;
            let d_out = 2.0 * err / n;

            grad[B3] += d_out;
            let mut d_h2 = [0.0; HIDDEN];
            for j in 0..HIDDEN {
                grad[W3 + j] += d_out * a.h2[j];
                d_h2[j] = d_out * p[W3 + j] * (1.0 - a.h2[j] * a.h2[j]);
            }
            let mut d_h1 = [0.0; HIDDEN];
            for j in 0..HIDDEN {
                let dz = d_h2[j];
                grad[B2 + j] += dz;
                let base = W2 + j * HIDDEN;
                for k in 0..HIDDEN {
                    grad[base + k] += dz * a.h1[k];
                    d_h1[k] += dz * p[base + k];
                }
            }
            let xin = input(x);
            for j in 0..HIDDEN {
                let dz = d_h1[j] * (1.0 - a.h1[j] * a.h1[j]);
                grad[B1 + j] += dz;
                let base = W1 + j * HYPER_DIM;
                for k in 0..HYPER_DIM {
                    grad[base + k] += dz * xin[k];
                }
            }
        }
        (loss, grad)
    }

    fn sgd_step(&mut self, grad: &[f64]) {
        for (i, ((p, v), g)) in self.params.iter_mut().zip(&mut self.velocity).zip(grad).enumerate() {
            let decay = if is_bias(i) { 0.0 } else { self.weight_decay * *p };
            *v = self.momentum * *v - self.learning_rate * (g + decay);
            *p += *v;
        }
        self.steps_taken += 1;
    }
}

/// Fit `net` to `(point, loss)` samples by mini-batch gradient descent with
/// momentum. Each epoch visits every sample once in a seeded shuffled order.
pub fn train_eval_net(mut net: EvalNet, samples: &[(Point, f64)], epochs: usize, seed: u64) -> Result<EvalNet> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let var = samples.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / n;
    net.target_mean = mean;
    net.target_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };

    let xs: Vec<Point> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| (s.1 - mean) / net.target_scale).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = net.batch_size.max(1);
    let mut bx = Vec::with_capacity(batch);
    let mut by = Vec::with_capacity(batch);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            bx.clear();
            by.clear();
            bx.extend(chunk.iter().map(|&i| xs[i]));
            by.extend(chunk.iter().map(|&i| ys[i]));
            let (_, grad) = net.mse_and_gradient(&bx, &by);
            net.sgd_step(&grad);
        }
    }
    let (mse, _) = net.mse_and_gradient(&xs, &ys);
    net.training_mse = mse * net.target_scale * net.target_scale;
    Ok(net)
}
