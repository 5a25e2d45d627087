//! Dual-network training loop.

use std::time::Instant;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backprop::{backward_pass, output_errors};
use crate::data::{encode_dataset, holdout_split, Dataset, EncodedDataset};
use crate::error::{Error, Result};
use crate::init::init_weights;
use crate::metrics::{update_cosine, CosineRecord, MetricsConfig};
use crate::network::{Network, NetworkConfig};
use crate::optim::{add_l2, clip_gradients, global_norm, AdamState, OptimizerConfig};
use crate::transport::{init_feedback, DualParams, TransportLedger, TransportStrategy, Transporter};

/// Samples per parallel work unit. Partial sums are combined in chunk order,
/// so results do not depend on the thread count.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Init = 0,
    DataOrder = 1,
    Transport = 2,
}

/// One of the three independent random streams derived from a run seed.
pub fn rng_stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSchedule {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            batch_size: 256,
            max_epochs: 100,
            early_stop_patience: 25,
            validation_fraction: 0.1,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("schedule.batch_size", "must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("schedule.max_epochs", "must be >= 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config("schedule.validation_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Mean loss and gradients of one batch for one error tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient {
    pub grads: Vec<Array2<f64>>,
    pub loss: f64,
    pub correct: usize,
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(CHUNK).map(|a| (a, (a + CHUNK).min(n))).collect()
}

/// Batch-mean gradients under each of `errors` (sharing one forward pass).
pub fn batch_gradients(
    net: &Network,
    forward: &[Array2<f64>],
    errors: &[&[Array2<f64>]],
    inputs: ArrayView2<f64>,
    targets: &[usize],
) -> Result<Vec<BatchGradient>> {
    let n = inputs.nrows();
    if n == 0 || targets.len() != n {
        return Err(Error::Shape(format!("{n} inputs with {} targets", targets.len())));
    }
    let parts: Vec<Vec<_>> = chunk_ranges(n)
        .into_par_iter()
        .map(|(a, b)| {
            let x = inputs.slice(s![a..b, ..]);
            let fp = net.forward(forward, x)?;
            errors
                .iter()
                .map(|e| backward_pass(net, &fp, forward, e, &targets[a..b]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(errors.len());
    for k in 0..errors.len() {
        let mut grads: Vec<Array2<f64>> = forward.iter().map(|w| Array2::zeros(w.dim())).collect();
        let (mut loss, mut correct) = (0.0, 0);
        for p in &parts {
            for (g, pg) in grads.iter_mut().zip(&p[k].grads) {
                *g += pg;
            }
            loss += p[k].loss_sum;
            correct += p[k].correct;
        }
        let scale = 1.0 / n as f64;
        for g in &mut grads {
            g.mapv_inplace(|x| x * scale);
        }
        out.push(BatchGradient {
            grads,
            loss: loss * scale,
            correct,
        });
    }
    Ok(out)
}

/// `(accuracy, mean loss)` of `weights` on a set of encoded samples.
pub fn evaluate(net: &Network, weights: &[Array2<f64>], data: &EncodedDataset) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Domain("cannot evaluate an empty split".into()));
    }
    let parts: Vec<(f64, usize)> = chunk_ranges(data.len())
        .into_par_iter()
        .map(|(a, b)| {
            let fp = net.forward(weights, data.times.slice(s![a..b, ..]))?;
            let (_, loss, correct) = output_errors(net, &fp, &data.labels[a..b])?;
            Ok((loss, correct))
        })
        .collect::<Result<_>>()?;
    let n = data.len() as f64;
    let loss: f64 = parts.iter().map(|p| p.0).sum();
    let correct: usize = parts.iter().map(|p| p.1).sum();
    Ok((correct as f64 / n, loss / n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub loss: f64,
    pub correct: usize,
}

/// Step-level training state: forward weights `W`, feedback `B`, optimizer and transport.
#[derive(Debug, Clone)]
pub struct Trainer {
    net: Network,
    params: DualParams,
    transporter: Transporter,
    ledger: TransportLedger,
    adam: AdamState,
    opt: OptimizerConfig,
    iteration: u64,
}

impl Trainer {
    /// Kaiming-initialised `W` (and sFA magnitudes) from the init stream of `seed`.
    pub fn new(net: Network, strategy: TransportStrategy, opt: OptimizerConfig, seed: u64) -> Result<Self> {
        opt.validate()?;
        strategy.validate()?;
        let mut init_rng = rng_stream(seed, Stream::Init);
        let forward = init_weights(&net, &mut init_rng);
        let (params, magnitudes) = init_feedback(&strategy, forward, &mut init_rng);
        let transporter = Transporter::new(strategy, magnitudes, rng_stream(seed, Stream::Transport))?;
        Ok(Trainer {
            ledger: TransportLedger::new(net.depth()),
            adam: AdamState::new(&params.forward),
            net,
            params,
            transporter,
            opt,
            iteration: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn params(&self) -> &DualParams {
        &self.params
    }

    pub fn ledger(&self) -> &TransportLedger {
        &self.ledger
    }

    pub fn optimizer(&self) -> &OptimizerConfig {
        &self.opt
    }

    /// Completed iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// One iteration: forward with `W`, errors through `B`, L2 + clip + Adam on `W`,
    /// then the transport step.
    pub fn step(&mut self, inputs: ArrayView2<f64>, targets: &[usize], lr: f64) -> Result<StepStats> {
        let iteration = self.iteration + 1;
        if !global_norm(&self.params.forward).is_finite() {
            return Err(Error::Divergence {
                iteration,
                reason: "non-finite forward weights".into(),
            });
        }
        let mut bg = batch_gradients(&self.net, &self.params.forward, &[&self.params.feedback], inputs, targets)?
            .pop()
            .expect("one error tensor");
        if !bg.loss.is_finite() {
            return Err(Error::Divergence {
                iteration,
                reason: format!("loss is {}", bg.loss),
            });
        }
        if !global_norm(&bg.grads).is_finite() {
            return Err(Error::Divergence {
                iteration,
                reason: "non-finite gradient".into(),
            });
        }
        add_l2(&mut bg.grads, &self.params.forward, self.opt.l2_lambda);
        clip_gradients(&mut bg.grads, self.opt.grad_clip, self.opt.clip_mode);
        self.adam.update(&mut self.params.forward, &bg.grads, lr, &self.opt);
        self.transporter.apply(&mut self.params, iteration, &mut self.ledger);
        self.iteration = iteration;
        Ok(StepStats {
            loss: bg.loss,
            correct: bg.correct,
        })
    }

    /// Cosine between true and dual updates at the current state.
    pub fn cosine(&self, inputs: ArrayView2<f64>, targets: &[usize]) -> Result<CosineRecord> {
        update_cosine(&self.net, &self.params, inputs, targets, &self.opt, self.iteration)
    }
}

/// Forward weights with the architecture that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub network: NetworkConfig,
    pub weights: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
    pub values_moved_cum: u64,
    pub signs_moved_cum: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    EarlyStopped,
    Diverged { iteration: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub train_samples: usize,
    pub features: usize,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub network: NetworkConfig,
    pub dataset: DatasetSummary,
    pub strategy: TransportStrategy,
    pub status: RunStatus,
    pub epochs: Vec<EpochRecord>,
    pub epochs_used: usize,
    pub best_epoch: usize,
    pub iterations: u64,
    pub best_val_acc: f64,
    pub test_accuracy: Option<f64>,
    pub ledger: TransportLedger,
    pub cosine: Vec<CosineRecord>,
    pub wall_clock_secs: f64,
}

/// Runs training on `train` (split into train/validation) and reports test
/// accuracy of the best-validation weights on `test`.
pub fn train(
    config: &NetworkConfig,
    strategy: TransportStrategy,
    opt: &OptimizerConfig,
    sched: &TrainSchedule,
    metrics: &MetricsConfig,
    seed: u64,
    train: &Dataset,
    test: Option<&Dataset>,
) -> Result<(TrainedModel, RunReport)> {
    let started = Instant::now();
    sched.validate()?;
    let net = Network::new(config)?;
    for d in std::iter::once(train).chain(test) {
        if d.features.ncols() != net.input_size() || d.num_classes > net.num_classes() {
            return Err(Error::Shape(format!(
                "dataset with {} features and {} classes does not fit a network with {} inputs and {} outputs",
                d.features.ncols(),
                d.num_classes,
                net.input_size(),
                net.num_classes()
            )));
        }
    }
    let mut data_rng = rng_stream(seed, Stream::DataOrder);
    let (train_idx, val_idx) = holdout_split(train.len(), sched.validation_fraction, &mut data_rng);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Domain("dataset too small for a train/validation split".into()));
    }
    let tw = net.time_window();
    let tr = encode_dataset(&train.subset(&train_idx), tw);
    let va = encode_dataset(&train.subset(&val_idx), tw);
    let te = test.map(|d| encode_dataset(d, tw));
    let probe_n = metrics.probe_size.clamp(1, va.len());
    let probe = va.times.slice(s![..probe_n, ..]).to_owned();
    let probe_y = &va.labels[..probe_n];

    let mut trainer = Trainer::new(net, strategy, opt.clone(), seed)?;
    let mut epochs = Vec::new();
    let mut cosine = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize, trainer.params.forward.clone());
    let mut status = RunStatus::Completed;
    let mut order: Vec<usize> = (0..tr.len()).collect();

    'epochs: for e in 0..sched.max_epochs {
        let lr = opt.learning_rate_after(e);
        order.shuffle(&mut data_rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for batch in order.chunks(sched.batch_size) {
            let next = trainer.iteration + 1;
            if metrics.cosine_every > 0 && next % metrics.cosine_every == 0 {
                let mut rec = trainer.cosine(probe.view(), probe_y)?;
                rec.iteration = next;
                cosine.push(rec);
            }
            let x = tr.times.select(Axis(0), batch);
            let y: Vec<usize> = batch.iter().map(|&i| tr.labels[i]).collect();
            match trainer.step(x.view(), &y, lr) {
                Ok(st) => {
                    loss_sum += st.loss * batch.len() as f64;
                    correct += st.correct;
                }
                Err(Error::Divergence { iteration, reason }) => {
                    status = RunStatus::Diverged { iteration, reason };
                    break 'epochs;
                }
                Err(err) => return Err(err),
            }
        }
        let (val_acc, val_loss) = evaluate(&trainer.net, &trainer.params.forward, &va)?;
        epochs.push(EpochRecord {
            epoch: e + 1,
            train_loss: loss_sum / tr.len() as f64,
            train_acc: correct as f64 / tr.len() as f64,
            val_loss,
            val_acc,
            lr,
            values_moved_cum: trainer.ledger.values_moved,
            signs_moved_cum: trainer.ledger.signs_moved,
        });
        if val_acc > best.0 {
            best = (val_acc, e + 1, trainer.params.forward.clone());
        } else if e + 1 - best.1 >= sched.early_stop_patience {
            status = RunStatus::EarlyStopped;
            break;
        }
    }

    let (best_val_acc, best_epoch, weights) = best;
    let test_accuracy = match &te {
        Some(te) => Some(evaluate(&trainer.net, &weights, te)?.0),
        None => None,
    };
    let report = RunReport {
        network: config.clone(),
        dataset: DatasetSummary {
            train_samples: train.len(),
            features: train.features.ncols(),
            classes: config.num_classes,
        },
        strategy,
        status,
        epochs_used: epochs.len(),
        epochs,
        best_epoch,
        iterations: trainer.iteration,
        best_val_acc: best_val_acc.max(0.0),
        test_accuracy,
        ledger: trainer.ledger.clone(),
        cosine,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((
        TrainedModel {
            network: config.clone(),
            weights,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_synthetic, SyntheticKind};
    use rand::Rng;

    fn synthetic_encoded(kind: SyntheticKind, n: usize, seed: u64) -> EncodedDataset {
        encode_dataset(&make_synthetic(kind, n, seed).unwrap(), 1.0)
    }

    // seed whose initial network has both outputs firing on part of the data
    const SEED: u64 = 10;

    fn run_iterations(strategy: TransportStrategy, iters: usize, lr: f64) -> (Trainer, EncodedDataset) {
        run_with(strategy, iters, lr, 64, SEED)
    }

    fn run_with(strategy: TransportStrategy, iters: usize, lr: f64, hidden: usize, seed: u64) -> (Trainer, EncodedDataset) {
        let sizes: Vec<usize> = if hidden == 0 { vec![2, 2] } else { vec![2, hidden, 2] };
        let net = Network::new(&NetworkConfig::mlp(&sizes)).unwrap();
        let opt = OptimizerConfig {
            l2_lambda: 0.0,
            ..Default::default()
        };
        let mut t = Trainer::new(net, strategy, opt, seed).unwrap();
        let data = synthetic_encoded(SyntheticKind::TwoGaussians, 1000, 2);
        let mut rng = rng_stream(seed, Stream::DataOrder);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut done = 0;
        while done < iters {
            order.shuffle(&mut rng);
            for batch in order.chunks(32) {
                if done == iters {
                    break;
                }
                let x = data.times.select(Axis(0), batch);
                let y: Vec<usize> = batch.iter().map(|&i| data.labels[i]).collect();
                t.step(x.view(), &y, lr).unwrap();
                done += 1;
            }
        }
        (t, data)
    }

    fn train_accuracy(t: &Trainer, data: &EncodedDataset) -> f64 {
        evaluate(&t.net, &t.params.forward, data).unwrap().0
    }

    /// Every output neuron fires for at least one sample.
    fn outputs_alive(t: &Trainer, data: &EncodedDataset) -> bool {
        let fp = t.net.forward(&t.params.forward, data.times.view()).unwrap();
        fp.trace
            .output()
            .columns()
            .into_iter()
            .all(|c| c.iter().any(|x| x.is_finite()))
    }

    #[test]
    fn silent_outputs_at_init_freeze_training() {
        // with every output silent on every sample no gradient reaches any weight
        let (t0, data) = run_with(TransportStrategy::FullEveryIteration, 0, 3e-3, 64, 3);
        let fp = t0.net.forward(&t0.params.forward, data.times.view()).unwrap();
        assert!(fp.trace.output().iter().all(|t| t.is_infinite()));
        let (t, _) = run_with(TransportStrategy::FullEveryIteration, 500, 3e-3, 64, 3);
        assert_eq!(t.params.forward, t0.params.forward);
        assert_eq!(train_accuracy(&t, &data), 0.5);
    }

    #[test]
    fn bp_learns_separable_task() {
        let (t0, data) = run_iterations(TransportStrategy::FullEveryIteration, 0, 3e-3);
        assert!(outputs_alive(&t0, &data));
        let (t, data) = run_iterations(TransportStrategy::FullEveryIteration, 500, 3e-3);
        let acc = train_accuracy(&t, &data);
        assert!(acc >= 0.99, "accuracy {acc}");
    }

    #[test]
    fn fbp_matches_bp_on_separable_task() {
        let (bp, data) = run_iterations(TransportStrategy::FullEveryIteration, 500, 3e-3);
        let (fbp, _) = run_iterations(TransportStrategy::FrozenPeriodic { phi: 50 }, 500, 3e-3);
        let (a, b) = (train_accuracy(&bp, &data), train_accuracy(&fbp, &data));
        assert!((a - b).abs() <= 0.01, "bp {a} fbp {b}");
    }

    #[test]
    fn bp_and_fbp_phi_one_are_bitwise_equal() {
        let (a, _) = run_iterations(TransportStrategy::FullEveryIteration, 60, 1e-2);
        let (b, _) = run_iterations(TransportStrategy::FrozenPeriodic { phi: 1 }, 60, 1e-2);
        assert_eq!(a.params.forward, b.params.forward);
    }

    #[test]
    fn feedback_changes_only_in_transport() {
        let net = Network::new(&NetworkConfig::mlp(&[2, 8, 6, 2])).unwrap();
        let mut t = Trainer::new(net, TransportStrategy::FrozenPeriodic { phi: 5 }, OptimizerConfig::default(), 4)
            .unwrap();
        let data = synthetic_encoded(SyntheticKind::XorQuadrants, 64, 1);
        for i in 1..=20u64 {
            let before = t.params.feedback.clone();
            let w_before = t.params.forward.clone();
            // an optimizer-only step must leave B untouched
            let mut adam = t.adam.clone();
            let mut w = t.params.forward.clone();
            let g: Vec<Array2<f64>> = w.iter().map(|x| Array2::ones(x.dim())).collect();
            adam.update(&mut w, &g, 1e-3, &t.opt);
            assert_eq!(t.params.feedback, before);

            t.step(data.times.view(), &data.labels, 1e-3).unwrap();
            assert_ne!(t.params.forward, w_before);
            if i % 5 == 0 {
                assert_eq!(t.params.feedback, t.params.forward);
            } else {
                assert_eq!(t.params.feedback, before);
            }
        }
    }

    #[test]
    fn chunked_gradient_matches_single_pass() {
        let net = Network::new(&NetworkConfig::mlp(&[5, 7, 3])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = init_weights(&net, &mut rng);
        let x = Array2::from_shape_fn((150, 5), |_| rng.random_range(0.0..1.0));
        let y: Vec<usize> = (0..150).map(|i| i % 3).collect();
        let bg = batch_gradients(&net, &w, &[&w], x.view(), &y).unwrap().pop().unwrap();
        let fp = net.forward(&w, x.view()).unwrap();
        let whole = backward_pass(&net, &fp, &w, &w, &y).unwrap();
        for (a, b) in bg.grads.iter().zip(&whole.grads) {
            for (p, q) in a.iter().zip(b.iter()) {
                assert!((p - q / 150.0).abs() <= 1e-12 * (1.0 + q.abs()));
            }
        }
        assert!((bg.loss - whole.loss_sum / 150.0).abs() < 1e-12);
    }

    #[test]
    fn random_model_is_at_chance() {
        let net = Network::new(&NetworkConfig::mlp(&[20, 10])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w = init_weights(&net, &mut rng);
        let data = EncodedDataset {
            times: Array2::from_shape_fn((10_000, 20), |_| rng.random_range(0.0..1.0)),
            labels: (0..10_000).map(|_| rng.random_range(0..10)).collect(),
        };
        let (acc, _) = evaluate(&net, &w, &data).unwrap();
        assert!((acc - 0.1).abs() <= 0.02, "accuracy {acc}");
    }

    fn small_run(seed: u64, sched: &TrainSchedule) -> (TrainedModel, RunReport) {
        let d = make_synthetic(SyntheticKind::Blobs { classes: 3, dim: 4 }, 300, 1).unwrap();
        let test = make_synthetic(SyntheticKind::Blobs { classes: 3, dim: 4 }, 90, 1).unwrap();
        let metrics = MetricsConfig {
            cosine_every: 5,
            probe_size: 16,
        };
        train(
            &NetworkConfig::mlp(&[4, 12, 3]),
            TransportStrategy::FrozenPeriodic { phi: 3 },
            &OptimizerConfig {
                learning_rate: 1e-2,
                ..Default::default()
            },
            sched,
            &metrics,
            seed,
            &d,
            Some(&test),
        )
        .unwrap()
    }

    #[test]
    fn train_is_deterministic() {
        let sched = TrainSchedule {
            batch_size: 32,
            max_epochs: 4,
            ..Default::default()
        };
        let (m1, mut r1) = small_run(3, &sched);
        let (m2, mut r2) = small_run(3, &sched);
        r1.wall_clock_secs = 0.0;
        r2.wall_clock_secs = 0.0;
        assert_eq!(m1, m2);
        assert_eq!(r1, r2);
        assert_eq!(r1.epochs.len(), 4);
        assert_eq!(r1.iterations, 4 * 9);
        assert!(r1.cosine.iter().all(|c| c.iteration % 5 == 0 && c.applied.len() == 1));
        for (e, rec) in r1.epochs.iter().enumerate() {
            assert_eq!(rec.lr, 1e-2 * 0.999f64.powi(e as i32));
        }
        let (_, r3) = small_run(4, &sched);
        assert_ne!(r1.epochs, r3.epochs);
    }

    #[test]
    fn early_stopping_returns_best_epoch() {
        let sched = TrainSchedule {
            batch_size: 32,
            max_epochs: 200,
            early_stop_patience: 2,
            ..Default::default()
        };
        let (_, r) = small_run(1, &sched);
        assert_eq!(r.status, RunStatus::EarlyStopped);
        assert_eq!(r.epochs_used, r.best_epoch + 2);
        let best = r.epochs.iter().map(|e| e.val_acc).fold(0.0, f64::max);
        assert_eq!(r.epochs[r.best_epoch - 1].val_acc, best);
        assert_eq!(r.best_val_acc, best);
    }

    #[test]
    fn divergence_is_reported() {
        let net = Network::new(&NetworkConfig::mlp(&[2, 2])).unwrap();
        let mut t = Trainer::new(net, TransportStrategy::FullEveryIteration, OptimizerConfig::default(), 0).unwrap();
        t.params.forward[0].fill(f64::NAN);
        t.params.feedback[0].fill(f64::NAN);
        let x = ndarray::array![[0.2, 0.4]];
        let err = t.step(x.view(), &[0], 1e-3).unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration: 1, .. }), "{err}");
    }

    #[test]
    fn schedule_validation() {
        assert!(TrainSchedule::default().validate().is_ok());
        let bad = TrainSchedule {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainSchedule {
            validation_fraction: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
