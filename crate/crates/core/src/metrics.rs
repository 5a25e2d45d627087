//! Gradient-bias and transport-efficiency instrumentation.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::Network;
use crate::optim::{add_l2, clip_gradients, OptimizerConfig};
use crate::trainer::{batch_gradients, RunReport};
use crate::transport::{transport_reduction_factor, DualParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Cosine sampling period in iterations; 0 disables it.
    pub cosine_every: u64,
    /// Samples in the fixed probe batch (taken from the validation split).
    pub probe_size: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            cosine_every: 50,
            probe_size: 256,
        }
    }
}

/// Per-layer cosine between true and actual updates; the final layer is never listed.
///
/// `None` marks a layer where one of the two vectors is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosineRecord {
    pub iteration: u64,
    /// Cosine of the applied updates (gradient + L2, then clipping).
    pub applied: Vec<Option<f64>>,
    /// Cosine of the raw mean gradients.
    pub raw: Vec<Option<f64>>,
}

pub fn cosine_similarity(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Option<f64> {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// The update direction the optimizer is fed: L2 term added, then clipped.
pub fn applied_update(grads: &[Array2<f64>], weights: &[Array2<f64>], opt: &OptimizerConfig) -> Vec<Array2<f64>> {
    let mut g = grads.to_vec();
    add_l2(&mut g, weights, opt.l2_lambda);
    clip_gradients(&mut g, opt.grad_clip, opt.clip_mode);
    g
}

/// Compares the oracle update (errors through `W`) with the dual update
/// (errors through `B`) on one batch. Does not touch `params`.
pub fn update_cosine(
    net: &Network,
    params: &DualParams,
    inputs: ArrayView2<f64>,
    targets: &[usize],
    opt: &OptimizerConfig,
    iteration: u64,
) -> Result<CosineRecord> {
    let both = batch_gradients(net, &params.forward, &[&params.forward, &params.feedback], inputs, targets)?;
    let (oracle, dual) = (&both[0].grads, &both[1].grads);
    let oracle_applied = applied_update(oracle, &params.forward, opt);
    let dual_applied = applied_update(dual, &params.forward, opt);
    let hidden = net.depth() - 1;
    Ok(CosineRecord {
        iteration,
        applied: (0..hidden)
            .map(|l| cosine_similarity(oracle_applied[l].view(), dual_applied[l].view()))
            .collect(),
        raw: (0..hidden)
            .map(|l| cosine_similarity(oracle[l].view(), dual[l].view()))
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub reduction_factor: f64,
    /// `baseline − run` test accuracy in percentage points.
    pub accuracy_drop_pp: f64,
}

pub fn tradeoff_point(report: &RunReport, baseline: &RunReport) -> Result<TradeoffPoint> {
    if report.network != baseline.network || report.dataset != baseline.dataset {
        return Err(Error::Shape(
            "tradeoff reports must share dataset and architecture".into(),
        ));
    }
    let (Some(base), Some(acc)) = (baseline.test_accuracy, report.test_accuracy) else {
        return Err(Error::Domain("tradeoff needs test accuracies".into()));
    };
    Ok(TradeoffPoint {
        reduction_factor: transport_reduction_factor(&baseline.ledger, &report.ledger),
        accuracy_drop_pp: 100.0 * (base - acc),
    })
}

pub fn tradeoff_curve(reports: &[RunReport], baseline: &RunReport) -> Result<Vec<TradeoffPoint>> {
    reports.iter().map(|r| tradeoff_point(r, baseline)).collect()
}
