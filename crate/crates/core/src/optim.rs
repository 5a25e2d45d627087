use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Rescale all layers together when their joint L2 norm exceeds the threshold.
    GlobalNorm,
    /// Clamp every entry to `[-threshold, threshold]`.
    PerElement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub l2_lambda: f64,
    pub grad_clip: f64,
    pub clip_mode: ClipMode,
    /// Learning-rate multiplier applied after every epoch.
    pub lr_anneal: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            l2_lambda: 1e-1,
            grad_clip: 1.0,
            clip_mode: ClipMode::GlobalNorm,
            lr_anneal: 0.999,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("optimizer.learning_rate", self.learning_rate),
            ("optimizer.eps", self.eps),
            ("optimizer.grad_clip", self.grad_clip),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(field, "must be a positive finite number"));
            }
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::config("optimizer.l2_lambda", "must be >= 0"));
        }
        for (field, v) in [("optimizer.beta1", self.beta1), ("optimizer.beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::config(field, "must lie in [0, 1)"));
            }
        }
        if !(self.lr_anneal > 0.0 && self.lr_anneal <= 1.0) {
            return Err(Error::config("optimizer.lr_anneal", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Learning rate in effect after `epochs` completed epochs.
    pub fn learning_rate_after(&self, epochs: usize) -> f64 {
        self.learning_rate * self.lr_anneal.powi(epochs as i32)
    }
}

/// Adds `λ·W` to the data gradient.
pub fn add_l2(grads: &mut [Array2<f64>], weights: &[Array2<f64>], lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    for (g, w) in grads.iter_mut().zip(weights) {
        g.scaled_add(lambda, w);
    }
}

pub fn global_norm(grads: &[Array2<f64>]) -> f64 {
    grads
        .iter()
        .map(|g| g.iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

pub fn clip_gradients(grads: &mut [Array2<f64>], threshold: f64, mode: ClipMode) {
    match mode {
        ClipMode::GlobalNorm => {
            let norm = global_norm(grads);
            if norm > threshold {
                let scale = threshold / norm;
                for g in grads.iter_mut() {
                    g.mapv_inplace(|x| x * scale);
                }
            }
        }
        ClipMode::PerElement => {
            for g in grads.iter_mut() {
                g.mapv_inplace(|x| x.clamp(-threshold, threshold));
            }
        }
    }
}

/// Adam moments for every weight tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(weights: &[Array2<f64>]) -> Self {
        AdamState {
            m: weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            v: weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            step: 0,
        }
    }

    /// One bias-corrected Adam step on `weights`.
    pub fn update(&mut self, weights: &mut [Array2<f64>], grads: &[Array2<f64>], lr: f64, cfg: &OptimizerConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2, eps) = (cfg.beta1, cfg.beta2, cfg.eps);
        for (((w, g), m), v) in weights.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
    }
}
