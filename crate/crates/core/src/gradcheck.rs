//! Central finite-difference check of the oracle-mode weight gradients.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::network::{ForwardPass, Network};
use crate::neuron::{firing_case, in_gradient_window, FiringCase};
use crate::trainer::{batch_gradients, evaluate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    /// Finite-difference step.
    pub step: f64,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so gradients at the
    /// finite-difference noise level are compared absolutely.
    pub abs_floor: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            step: 1e-6,
            tolerance: 1e-4,
            abs_floor: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightIndex {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub worst: Option<WeightIndex>,
    pub checked: usize,
    /// Weights whose perturbation moved some neuron across a case boundary.
    pub skipped: usize,
    pub passed: bool,
}

/// `|a − n| / max(|a|, |n|, floor)`; two zeros agree.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(floor)
}

/// Branch of every neuron (plus pooling routes), used to detect perturbations
/// that cross a discontinuity of the spike-time function.
fn signature(net: &Network, fp: &ForwardPass) -> Vec<u8> {
    let tw = net.time_window();
    let mut sig = Vec::new();
    for l in 1..=net.depth() {
        for &t in fp.neuron_times(l).iter() {
            sig.push(match firing_case(t, l, tw) {
                FiringCase::WindowStart => 0,
                FiringCase::Crossing if in_gradient_window(t, l, tw) => 1,
                FiringCase::Crossing => 2,
                FiringCase::Silent => 3,
            });
        }
        if let Some(p) = &fp.caches[l - 1].pool {
            sig.extend(p.argmin.iter().map(|&a| a as u8));
        }
    }
    sig
}

fn mean_loss(net: &Network, weights: &[Array2<f64>], inputs: ArrayView2<f64>, targets: &[usize]) -> Result<(f64, Vec<u8>)> {
    let fp = net.forward(weights, inputs)?;
    let data = EncodedDataset {
        times: inputs.to_owned(),
        labels: targets.to_vec(),
    };
    let (_, loss) = evaluate(net, weights, &data)?;
    Ok((loss, signature(net, &fp)))
}

/// Compares every weight gradient of the batch-mean loss against central differences.
pub fn gradcheck(
    net: &Network,
    weights: &[Array2<f64>],
    inputs: ArrayView2<f64>,
    targets: &[usize],
    cfg: &GradcheckConfig,
) -> Result<GradcheckReport> {
    if !(cfg.step > 0.0 && cfg.tolerance > 0.0 && cfg.abs_floor >= 0.0) {
        return Err(Error::config("gradcheck", "step and tolerance must be positive"));
    }
    let analytic = batch_gradients(net, weights, &[weights], inputs, targets)?
        .pop()
        .expect("one error tensor")
        .grads;
    let (_, base_sig) = mean_loss(net, weights, inputs, targets)?;
    let mut w = weights.to_vec();
    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped: 0,
        passed: true,
    };
    for layer in 0..w.len() {
        let (rows, cols) = w[layer].dim();
        for row in 0..rows {
            for col in 0..cols {
                let orig = w[layer][[row, col]];
                w[layer][[row, col]] = orig + cfg.step;
                let (lp, sp) = mean_loss(net, &w, inputs, targets)?;
                w[layer][[row, col]] = orig - cfg.step;
                let (lm, sm) = mean_loss(net, &w, inputs, targets)?;
                w[layer][[row, col]] = orig;
                if sp != base_sig || sm != base_sig {
                    report.skipped += 1;
                    continue;
                }
                let numeric = (lp - lm) / (2.0 * cfg.step);
                let err = relative_error(analytic[layer][[row, col]], numeric, cfg.abs_floor);
                report.checked += 1;
                if err > report.max_rel_error {
                    report.max_rel_error = err;
                    report.worst = Some(WeightIndex { layer, row, col });
                }
            }
        }
    }
    report.passed = report.max_rel_error <= cfg.tolerance;
    Ok(report)
}
