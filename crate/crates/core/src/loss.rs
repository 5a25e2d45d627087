//! Cross-entropy on negated output spike times.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// `∂L/∂t^L`; sums to zero.
    pub output_grad: Vec<f64>,
}

/// `L = t_d + log Σ_i exp(-t_i)`, so the target neuron is pushed to fire first.
///
/// All times must be finite; silent outputs are clamped by the caller
/// (see [`clamp_silent`]).
pub fn temporal_cross_entropy(output_times: &[f64], target: usize) -> Result<LossOutput> {
    if target >= output_times.len() {
        return Err(Error::Domain(format!(
            "target {target} out of range for {} outputs",
            output_times.len()
        )));
    }
    // softmax(-t) shifted by the earliest spike
    let t_min = output_times.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = output_times.iter().map(|&t| (t_min - t).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = output_times[target] - t_min + z.ln();
    let mut output_grad: Vec<f64> = exps.iter().map(|e| -e / z).collect();
    output_grad[target] += 1.0;
    Ok(LossOutput { loss, output_grad })
}

/// Replaces silent output times with the window end `T_w·(L+1)`.
pub fn clamp_silent(times: &[f64], deadline: f64) -> Vec<f64> {
    times.iter().map(|&t| if t.is_finite() { t } else { deadline }).collect()
}

/// Earliest spike wins; ties (including all-silent outputs) go to the lowest index.
pub fn predict(output_times: &[f64]) -> usize {
    let mut best = 0;
    for (i, &t) in output_times.iter().enumerate() {
        if t < output_times[best] {
            best = i;
        }
    }
    best
}
