use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::trainer::rollout::Trajectory;

/// Anything that predicts the return from state features.
pub trait Baseline: Sync {
    fn value(&self, features: &[f64]) -> f64;
}

/// A fixed prediction for every state.
#[derive(Debug, Clone, Copy)]
pub struct ConstantBaseline(pub f64);

impl Baseline for ConstantBaseline {
    fn value(&self, _: &[f64]) -> f64 {
        self.0
    }
}

/// One hidden tanh layer followed by a linear output.
///
/// Layout of `params`: `w1` (hidden x input, row-major), `b1`, `w2`, `b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineNet {
    input_dim: usize,
    hidden: usize,
    params: Vec<f64>,
}

impl BaselineNet {
    pub fn num_params_for(input_dim: usize, hidden: usize) -> usize {
        hidden * input_dim + 2 * hidden + 1
    }

    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = rng_for(seed, "baseline-init", &[]);
        let mut params = vec![0.0; Self::num_params_for(input_dim, hidden)];
        let s1 = 1.0 / (input_dim.max(1) as f64).sqrt();
        for w in &mut params[..hidden * input_dim] {
            *w = rng.random_range(-s1..s1);
        }
        let s2 = 1.0 / (hidden as f64).sqrt();
        let w2 = hidden * input_dim + hidden;
        for w in &mut params[w2..w2 + hidden] {
            *w = rng.random_range(-s2..s2);
        }
        BaselineNet {
            input_dim,
            hidden,
            params,
        }
    }

    pub fn from_params(input_dim: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        if params.len() != Self::num_params_for(input_dim, hidden) {
            return Err(Error::Checkpoint(format!(
                "baseline expects {} parameters, got {}",
                Self::num_params_for(input_dim, hidden),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Checkpoint("baseline parameters must be finite".into()));
        }
        Ok(BaselineNet {
            input_dim,
            hidden,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        let b1 = self.hidden * self.input_dim;
        (0..self.hidden)
            .map(|k| {
                let row = &self.params[k * self.input_dim..(k + 1) * self.input_dim];
                let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.params[b1 + k];
                z.tanh()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let h = self.hidden_activations(x);
        let w2 = self.hidden * self.input_dim + self.hidden;
        let out: f64 = h.iter().zip(&self.params[w2..w2 + self.hidden]).map(|(a, b)| a * b).sum();
        out + self.params[w2 + self.hidden]
    }

    /// Adds `scale * d forward(x) / d params` into `out`.
    pub fn accumulate_grad(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        let h = self.hidden_activations(x);
        let b1 = self.hidden * self.input_dim;
        let w2 = b1 + self.hidden;
        for k in 0..self.hidden {
            out[w2 + k] += scale * h[k];
            let dz = scale * self.params[w2 + k] * (1.0 - h[k] * h[k]);
            out[b1 + k] += dz;
            for (g, v) in out[k * self.input_dim..(k + 1) * self.input_dim].iter_mut().zip(x) {
                *g += dz * v;
            }
        }
        out[w2 + self.hidden] += scale;
    }
}

impl Baseline for BaselineNet {
    fn value(&self, features: &[f64]) -> f64 {
        self.forward(features)
    }
}

/// Mean squared error of the baseline over `(features, target)` pairs and
/// its gradient.
pub fn mse_and_grad<'a>(net: &BaselineNet, samples: impl Iterator<Item = (&'a [f64], f64)>) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; net.params.len()];
    let mut loss = 0.0;
    let mut n = 0usize;
    for (x, q) in samples {
        let err = net.forward(x) - q;
        loss += err * err;
        net.accumulate_grad(x, 2.0 * err, &mut grad);
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        loss *= inv;
        for g in &mut grad {
            *g *= inv;
        }
    }
    (loss, grad)
}

/// One SGD step on the mean squared error between the baseline and the
/// returns of every step in `batch`. Returns the loss before the step.
pub fn baseline_update(batch: &[Trajectory], net: &mut BaselineNet, lr: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let samples = batch.iter().flat_map(|t| t.steps.iter().map(|s| (s.features.as_slice(), s.ret)));
    let (loss, grad) = mse_and_grad(net, samples);
    for (p, g) in net.params.iter_mut().zip(&grad) {
        *p -= lr * g;
    }
    Ok(loss)
}
