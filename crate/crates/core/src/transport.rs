//! Weight transport between the forward network `W` and the feedback network `B`.
//!
//! A [`Transporter`] is invoked once per iteration, after the optimizer has
//! updated `W`, and decides which feedback weights (or signs) are realigned.
//! Every copied scalar is recorded in a [`TransportLedger`].

use ndarray::{Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::kaiming_normal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransportStrategy {
    /// Plain BP: `B ← W` after every iteration.
    #[serde(rename = "bp")]
    FullEveryIteration,
    /// fBP: `B` frozen for `phi` iterations, then fully realigned.
    #[serde(rename = "fbp")]
    FrozenPeriodic { phi: u64 },
    /// Every `phi` iterations, realign the `k` percent of each layer that moved most.
    #[serde(rename = "top_k")]
    TopKChange { phi: u64, k: f64 },
    /// Every `phi` iterations, realign each weight with probability `p`.
    #[serde(rename = "random")]
    RandomSample { phi: u64, p: f64 },
    /// Each iteration, realign with probability `1 - exp(-|W - W̃| / beta)`.
    #[serde(rename = "change_weighted")]
    ChangeWeighted { beta: f64 },
    /// sFA: `B = B̂ ∘ sign(W)` with fixed random magnitudes.
    #[serde(rename = "sfa")]
    SignFeedbackAlignment,
    /// SS: `B = sign(W)` every iteration.
    #[serde(rename = "ss")]
    SignSymmetry,
    /// fSS: `B = sign(W)` every `phi` iterations.
    #[serde(rename = "fss")]
    FrozenSignSymmetry { phi: u64 },
    /// fBP plus a per-iteration copy of `sign(W)` onto `B`.
    #[serde(rename = "fbp_sign_sharing")]
    FrozenWithSignSharing { phi: u64 },
}

impl TransportStrategy {
    pub fn validate(&self) -> Result<()> {
        use TransportStrategy::*;
        let check_phi = |phi: u64| {
            if phi < 1 {
                Err(Error::config("strategy.phi", "phi must be >= 1"))
            } else {
                Ok(())
            }
        };
        match *self {
            FullEveryIteration | SignFeedbackAlignment | SignSymmetry => Ok(()),
            FrozenPeriodic { phi } | FrozenSignSymmetry { phi } | FrozenWithSignSharing { phi } => {
                check_phi(phi)
            }
            TopKChange { phi, k } => {
                check_phi(phi)?;
                if !(k > 0.0 && k <= 100.0) {
                    return Err(Error::config("strategy.k", "k must satisfy 0 < k <= 100"));
                }
                Ok(())
            }
            RandomSample { phi, p } => {
                check_phi(phi)?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config("strategy.p", "p must satisfy 0 <= p <= 1"));
                }
                Ok(())
            }
            ChangeWeighted { beta } => {
                if !(beta > 0.0 && beta.is_finite()) {
                    return Err(Error::config("strategy.beta", "beta must be a positive finite number"));
                }
                Ok(())
            }
        }
    }

    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        use TransportStrategy::*;
        match self {
            FullEveryIteration => "bp",
            FrozenPeriodic { .. } => "fbp",
            TopKChange { .. } => "top_k",
            RandomSample { .. } => "random",
            ChangeWeighted { .. } => "change_weighted",
            SignFeedbackAlignment => "sfa",
            SignSymmetry => "ss",
            FrozenSignSymmetry { .. } => "fss",
            FrozenWithSignSharing { .. } => "fbp_sign_sharing",
        }
    }

    /// Hyperparameters as `(name, value)` pairs, in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        use TransportStrategy::*;
        match *self {
            FullEveryIteration | SignFeedbackAlignment | SignSymmetry => vec![],
            FrozenPeriodic { phi } | FrozenSignSymmetry { phi } | FrozenWithSignSharing { phi } => {
                vec![("phi", phi as f64)]
            }
            TopKChange { phi, k } => vec![("phi", phi as f64), ("k", k)],
            RandomSample { phi, p } => vec![("phi", phi as f64), ("p", p)],
            ChangeWeighted { beta } => vec![("beta", beta)],
        }
    }
}

/// Forward weights, feedback weights and the per-entry snapshot of `W` at its last transport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualParams {
    pub forward: Vec<Array2<f64>>,
    pub feedback: Vec<Array2<f64>>,
    pub snapshot: Vec<Array2<f64>>,
}

impl DualParams {
    /// Symmetric start: `B = W̃ = W`.
    pub fn symmetric(forward: Vec<Array2<f64>>) -> Self {
        DualParams {
            feedback: forward.clone(),
            snapshot: forward.clone(),
            forward,
        }
    }

    pub fn weight_count(&self) -> usize {
        self.forward.iter().map(|w| w.len()).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTransport {
    pub values_moved: u64,
    pub signs_moved: u64,
    pub signs_moved_all: u64,
}

/// Monotone transport counters.
///
/// A value transport also moves the sign, so it increments both `values_moved`
/// and `signs_moved`. Sign-only transports count changed signs in `signs_moved`
/// and every sign sent in `signs_moved_all`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportLedger {
    /// Iterations at which a scheduled transport ran.
    pub transport_events: u64,
    pub values_moved: u64,
    pub signs_moved: u64,
    pub signs_moved_all: u64,
    pub per_layer: Vec<LayerTransport>,
}

impl TransportLedger {
    pub fn new(layers: usize) -> Self {
        TransportLedger {
            per_layer: vec![LayerTransport::default(); layers],
            ..Default::default()
        }
    }

    fn values(&mut self, layer: usize, n: u64) {
        self.values_moved += n;
        self.signs_moved += n;
        self.signs_moved_all += n;
        let l = &mut self.per_layer[layer];
        l.values_moved += n;
        l.signs_moved += n;
        l.signs_moved_all += n;
    }

    fn signs(&mut self, layer: usize, changed: u64, sent: u64) {
        self.signs_moved += changed;
        self.signs_moved_all += sent;
        let l = &mut self.per_layer[layer];
        l.signs_moved += changed;
        l.signs_moved_all += sent;
    }
}

/// `values_moved(bp) / values_moved(other)`; `+inf` if `other` moved nothing.
pub fn transport_reduction_factor(bp: &TransportLedger, other: &TransportLedger) -> f64 {
    if other.values_moved == 0 {
        f64::INFINITY
    } else {
        bp.values_moved as f64 / other.values_moved as f64
    }
}

#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Number of entries selected by a top-`k`% transport of `n` weights: `⌈k·n/100⌉`.
pub fn top_k_count(k_percent: f64, n: usize) -> usize {
    let exact = k_percent * n as f64 / 100.0;
    let rounded = exact.round();
    // k·n/100 that is integral up to rounding noise must not be bumped up
    let count = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (count as usize).clamp(0, n)
}

/// Flat indices of the `count` largest entries of `delta`, ties to the lowest index.
pub fn top_k_indices(delta: &[f64], count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..delta.len()).collect();
    if count == 0 {
        return Vec::new();
    }
    let order = |a: &usize, b: &usize| delta[*b].total_cmp(&delta[*a]).then(a.cmp(b));
    if count < idx.len() {
        idx.select_nth_unstable_by(count - 1, order);
        idx.truncate(count);
    }
    idx.sort_unstable();
    idx
}

/// Builds the initial dual parameters and, for sFA, the fixed feedback magnitudes.
pub fn init_feedback<R: Rng + ?Sized>(
    strategy: &TransportStrategy,
    forward: Vec<Array2<f64>>,
    rng: &mut R,
) -> (DualParams, Option<Vec<Array2<f64>>>) {
    let mut params = DualParams::symmetric(forward);
    match strategy {
        TransportStrategy::SignSymmetry | TransportStrategy::FrozenSignSymmetry { .. } => {
            for (b, w) in params.feedback.iter_mut().zip(&params.forward) {
                *b = w.mapv(sign);
            }
            (params, None)
        }
        TransportStrategy::SignFeedbackAlignment => {
            let magnitudes: Vec<Array2<f64>> = params
                .forward
                .iter()
                .map(|w| kaiming_normal(w.dim(), w.nrows(), rng).mapv(f64::abs))
                .collect();
            for ((b, w), m) in params.feedback.iter_mut().zip(&params.forward).zip(&magnitudes) {
                *b = m * &w.mapv(sign);
            }
            (params, Some(magnitudes))
        }
        _ => (params, None),
    }
}

/// Stateful transport policy.
#[derive(Debug, Clone)]
pub struct Transporter {
    strategy: TransportStrategy,
    magnitudes: Option<Vec<Array2<f64>>>,
    rng: ChaCha8Rng,
}

impl Transporter {
    /// `magnitudes` are the sFA `B̂` tensors from [`init_feedback`]; `rng` is the
    /// dedicated transport stream.
    pub fn new(strategy: TransportStrategy, magnitudes: Option<Vec<Array2<f64>>>, rng: ChaCha8Rng) -> Result<Self> {
        strategy.validate()?;
        if matches!(strategy, TransportStrategy::SignFeedbackAlignment) && magnitudes.is_none() {
            return Err(Error::config("strategy", "sfa requires feedback magnitudes"));
        }
        Ok(Transporter {
            strategy,
            magnitudes,
            rng,
        })
    }

    pub fn from_seed(strategy: TransportStrategy, magnitudes: Option<Vec<Array2<f64>>>, seed: u64) -> Result<Self> {
        Self::new(strategy, magnitudes, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn strategy(&self) -> &TransportStrategy {
        &self.strategy
    }

    /// Whether a value transport is scheduled after `iteration` (counted from 1).
    pub fn is_transport_iteration(&self, iteration: u64) -> bool {
        use TransportStrategy::*;
        match self.strategy {
            FullEveryIteration | ChangeWeighted { .. } | SignFeedbackAlignment | SignSymmetry => true,
            FrozenPeriodic { phi }
            | TopKChange { phi, .. }
            | RandomSample { phi, .. }
            | FrozenSignSymmetry { phi }
            | FrozenWithSignSharing { phi } => iteration % phi == 0,
        }
    }

    /// Runs the transport step that follows the `iteration`-th weight update.
    pub fn apply(&mut self, params: &mut DualParams, iteration: u64, ledger: &mut TransportLedger) {
        use TransportStrategy::*;
        if ledger.per_layer.len() != params.forward.len() {
            ledger.per_layer.resize(params.forward.len(), LayerTransport::default());
        }
        let scheduled = self.is_transport_iteration(iteration);
        match self.strategy {
            FullEveryIteration => self.full(params, ledger),
            FrozenPeriodic { .. } => {
                if scheduled {
                    self.full(params, ledger)
                }
            }
            TopKChange { k, .. } => {
                if scheduled {
                    ledger.transport_events += 1;
                    for l in 0..params.forward.len() {
                        let w = params.forward[l].as_slice().expect("standard layout");
                        let snap = params.snapshot[l].as_slice().expect("standard layout");
                        let delta: Vec<f64> = w.iter().zip(snap).map(|(a, b)| (a - b).abs()).collect();
                        let chosen = top_k_indices(&delta, top_k_count(k, delta.len()));
                        let n = chosen.len() as u64;
                        copy_entries(params, l, chosen.into_iter());
                        ledger.values(l, n);
                    }
                }
            }
            RandomSample { p, .. } => {
                if scheduled {
                    ledger.transport_events += 1;
                    for l in 0..params.forward.len() {
                        let n_w = params.forward[l].len();
                        let chosen: Vec<usize> = (0..n_w).filter(|_| self.rng.random::<f64>() < p).collect();
                        let n = chosen.len() as u64;
                        copy_entries(params, l, chosen.into_iter());
                        ledger.values(l, n);
                    }
                }
            }
            ChangeWeighted { beta } => {
                ledger.transport_events += 1;
                for l in 0..params.forward.len() {
                    let w = params.forward[l].as_slice().expect("standard layout");
                    let snap = params.snapshot[l].as_slice().expect("standard layout");
                    let mut chosen = Vec::new();
                    for (i, (a, b)) in w.iter().zip(snap).enumerate() {
                        // one draw per weight keeps the stream aligned across runs
                        let u: f64 = self.rng.random();
                        if u < change_weighted_probability(a - b, beta) {
                            chosen.push(i);
                        }
                    }
                    let n = chosen.len() as u64;
                    copy_entries(params, l, chosen.into_iter());
                    ledger.values(l, n);
                }
            }
            SignFeedbackAlignment => {
                ledger.transport_events += 1;
                let mags = self.magnitudes.as_ref().expect("checked in new");
                for (l, m) in mags.iter().enumerate() {
                    let mut changed = 0u64;
                    Zip::from(&mut params.feedback[l])
                        .and(&params.forward[l])
                        .and(m)
                        .for_each(|b, &w, &m| {
                            if sign(*b) != sign(w) {
                                changed += 1;
                            }
                            *b = m * sign(w);
                        });
                    ledger.signs(l, changed, m.len() as u64);
                }
            }
            SignSymmetry => self.sign_symmetry(params, ledger),
            FrozenSignSymmetry { .. } => {
                if scheduled {
                    self.sign_symmetry(params, ledger)
                }
            }
            FrozenWithSignSharing { .. } => {
                if scheduled {
                    self.full(params, ledger);
                } else {
                    ledger.transport_events += 1;
                    for l in 0..params.forward.len() {
                        let mut changed = 0u64;
                        Zip::from(&mut params.feedback[l])
                            .and(&params.forward[l])
                            .for_each(|b, &w| {
                                if sign(*b) != sign(w) {
                                    changed += 1;
                                    *b = b.abs() * sign(w);
                                }
                            });
                        ledger.signs(l, changed, params.forward[l].len() as u64);
                    }
                }
            }
        }
    }

    fn full(&self, params: &mut DualParams, ledger: &mut TransportLedger) {
        ledger.transport_events += 1;
        for l in 0..params.forward.len() {
            params.feedback[l].assign(&params.forward[l]);
            params.snapshot[l].assign(&params.forward[l]);
            ledger.values(l, params.forward[l].len() as u64);
        }
    }

    fn sign_symmetry(&self, params: &mut DualParams, ledger: &mut TransportLedger) {
        ledger.transport_events += 1;
        for l in 0..params.forward.len() {
            let mut changed = 0u64;
            Zip::from(&mut params.feedback[l])
                .and(&params.forward[l])
                .for_each(|b, &w| {
                    let s = sign(w);
                    if *b != s {
                        changed += 1;
                    }
                    *b = s;
                });
            ledger.signs(l, changed, params.forward[l].len() as u64);
        }
    }
}

/// `1 - exp(-|Δ| / β)`.
pub fn change_weighted_probability(delta: f64, beta: f64) -> f64 {
    -(-delta.abs() / beta).exp_m1()
}

fn copy_entries(params: &mut DualParams, layer: usize, idx: impl Iterator<Item = usize>) {
    let w = params.forward[layer].as_slice().expect("standard layout");
    let b = params.feedback[layer].as_slice_mut().expect("standard layout");
    let s = params.snapshot[layer].as_slice_mut().expect("standard layout");
    for i in idx {
        b[i] = w[i];
        s[i] = w[i];
    }
}
