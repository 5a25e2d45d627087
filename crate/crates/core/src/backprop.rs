//! Exact event-driven gradients of the spike-time loss.
//!
//! Neuron errors `δ^l = ∂L/∂t^l` are propagated through an error-weight tensor
//! `E` (the feedback weights `B` in the dual network, or `W` itself for the
//! true gradient), while `∂t^l/∂W^l` always uses the forward weights and the
//! causal sets recorded during the forward pass.

use ndarray::{Array2, ArrayView2, Axis, Zip};

use crate::conv;
use crate::error::{Error, Result};
use crate::loss::{clamp_silent, predict, temporal_cross_entropy};
use crate::network::{causal_weight_sums, finite_or_zero, ForwardPass, Network, Stage};
use crate::neuron::{in_gradient_window, DENOMINATOR_GUARD, NO_SPIKE};

/// `∂t_j/∂W_ij` for a causal input of a neuron that fired inside its window.
#[inline]
pub fn grad_t_wrt_w(input_time: f64, output_time: f64, causal_weight_sum: f64) -> f64 {
    (input_time - output_time) / (1.0 + causal_weight_sum)
}

/// `∂t_j/∂t_i`; zero unless the output fired strictly inside its window.
#[inline]
pub fn grad_t_wrt_t(weight: f64, causal_weight_sum: f64, fired_in_window: bool) -> f64 {
    if fired_in_window {
        weight / (1.0 + causal_weight_sum)
    } else {
        0.0
    }
}

/// Per-batch result of a backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardState {
    /// `deltas[l-1]` holds `δ^l` for layers `1..=L` (`[batch, layer output size]`).
    pub deltas: Vec<Array2<f64>>,
    /// `∂L/∂W^l` summed over the batch.
    pub grads: Vec<Array2<f64>>,
    pub loss_sum: f64,
    pub correct: usize,
}

/// Loss and output errors for a batch; silent outputs are clamped to `T_w·(L+1)`.
pub fn output_errors(net: &Network, fp: &ForwardPass, targets: &[usize]) -> Result<(Array2<f64>, f64, usize)> {
    let out = fp.trace.output();
    if targets.len() != out.nrows() {
        return Err(Error::Shape(format!(
            "{} targets for a batch of {}",
            targets.len(),
            out.nrows()
        )));
    }
    let deadline = net.output_deadline();
    let mut delta = Array2::zeros(out.dim());
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for (b, &d) in targets.iter().enumerate() {
        let row = out.row(b).to_vec();
        if predict(&row) == d {
            correct += 1;
        }
        let lo = temporal_cross_entropy(&clamp_silent(&row, deadline), d)?;
        loss_sum += lo.loss;
        delta.row_mut(b).assign(&ndarray::ArrayView1::from(&lo.output_grad));
    }
    Ok((delta, loss_sum, correct))
}

/// Backward pass over a batch.
///
/// `forward` must be the weights that produced `fp`; `error` is the tensor used to
/// propagate neuron errors (`B` in dual mode, `W` in oracle mode).
pub fn backward_pass(
    net: &Network,
    fp: &ForwardPass,
    forward: &[Array2<f64>],
    error: &[Array2<f64>],
    targets: &[usize],
) -> Result<BackwardState> {
    net.check_weights(forward)?;
    net.check_weights(error)?;
    if fp.caches.len() != net.depth() {
        return Err(Error::Shape("trace depth does not match network".into()));
    }
    let (mut delta, loss_sum, correct) = output_errors(net, fp, targets)?;
    let depth = net.depth();
    let tw = net.time_window();
    let mut deltas = vec![Array2::zeros((0, 0)); depth];
    let mut grads = vec![Array2::zeros((0, 0)); depth];

    for l in (1..=depth).rev() {
        let stage = &net.stages()[l - 1];
        let cache = &fp.caches[l - 1];
        let input = fp.trace.layers[l - 1].view();

        // errors at the neurons themselves (pre-pool)
        let neuron_delta = match &cache.pool {
            Some(p) => conv::maxpool_backward(delta.view(), p.argmin.view(), p.pre_pool.ncols()),
            None => delta.clone(),
        };
        let (t_out, d_out) = native_layout(stage, fp.neuron_times(l).view(), neuron_delta.view());

        let g = scaled_errors(d_out.view(), t_out.view(), cache.weight_sums.view(), l, tw);
        grads[l - 1] = weight_gradient(stage, input, &g, t_out.view());

        if l > 1 {
            let e = error[l - 1].view();
            // B == W (BP, or fBP right after a transport) reproduces the forward sums
            let sums_e = if e == forward[l - 1].view() {
                cache.weight_sums.clone()
            } else {
                causal_weight_sums(stage, input, e)
            };
            let ge = scaled_errors(d_out.view(), t_out.view(), sums_e.view(), l, tw);
            let mut d_in = match *stage {
                Stage::Dense { .. } => ge.dot(&e.t()),
                Stage::Conv {
                    in_channels,
                    height,
                    width,
                    ..
                } => conv::col2im(ge.dot(&e.t()).view(), input.nrows(), in_channels, height, width),
            };
            Zip::from(&mut d_in).and(input).for_each(|d, &t| {
                if t == NO_SPIKE {
                    *d = 0.0;
                }
            });
            deltas[l - 1] = std::mem::replace(&mut delta, d_in);
        } else {
            deltas[0] = std::mem::take(&mut delta);
        }
    }
    Ok(BackwardState {
        deltas,
        grads,
        loss_sum,
        correct,
    })
}

/// Spike times and errors in the stage's matmul layout.
fn native_layout(stage: &Stage, times: ArrayView2<f64>, delta: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    match *stage {
        Stage::Dense { .. } => (times.to_owned(), delta.to_owned()),
        Stage::Conv {
            out_channels,
            height,
            width,
            ..
        } => {
            let hw = height * width;
            (
                conv::channel_major_to_rows(times, out_channels, hw),
                conv::channel_major_to_rows(delta, out_channels, hw),
            )
        }
    }
}

/// `δ_j / (1 + Σ_{C_j} E)` for neurons that fired strictly inside the window, else 0.
fn scaled_errors(
    delta: ArrayView2<f64>,
    times: ArrayView2<f64>,
    sums: ArrayView2<f64>,
    layer: usize,
    time_window: f64,
) -> Array2<f64> {
    let mut g = Array2::zeros(delta.dim());
    Zip::from(&mut g)
        .and(delta)
        .and(times)
        .and(sums)
        .for_each(|g, &d, &t, &s| {
            let denom = 1.0 + s;
            if in_gradient_window(t, layer, time_window) && denom.abs() >= DENOMINATOR_GUARD {
                *g = d / denom;
            }
        });
    g
}

/// `Σ_b g_bj (t_bi - t_bj)` over causal inputs `i`.
fn weight_gradient(stage: &Stage, input: ArrayView2<f64>, g: &Array2<f64>, t_out: ArrayView2<f64>) -> Array2<f64> {
    // g is zero wherever t_out is silent
    let mut gt = Array2::zeros(g.dim());
    Zip::from(&mut gt).and(g).and(t_out).for_each(|p, &g, &t| {
        if g != 0.0 {
            *p = g * t;
        }
    });
    let t0 = finite_or_zero(input);
    match *stage {
        Stage::Dense { .. } => {
            let mut grad = t0.t().dot(g);
            if input.iter().all(|t| t.is_finite()) {
                grad -= &gt.sum_axis(Axis(0));
            } else {
                let mask = input.mapv(|t| if t.is_finite() { 1.0 } else { 0.0 });
                grad -= &mask.t().dot(&gt);
            }
            grad
        }
        Stage::Conv {
            in_channels,
            height,
            width,
            ..
        } => {
            let mask = input.mapv(|t| if t.is_finite() { 1.0 } else { 0.0 });
            let pt = conv::im2col(t0.view(), in_channels, height, width);
            let pm = conv::im2col(mask.view(), in_channels, height, width);
            pt.t().dot(g) - pm.t().dot(&gt)
        }
    }
}

/// Mean loss of a single sample (used by finite-difference checks).
pub fn sample_loss(net: &Network, weights: &[Array2<f64>], input: &[f64], target: usize) -> Result<f64> {
    let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::Shape(e.to_string()))?;
    let fp = net.forward(weights, x)?;
    Ok(output_errors(net, &fp, &[target])?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkConfig;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn local_derivative_examples() {
        assert_eq!(grad_t_wrt_w(0.5, 1.25, 1.0), -0.375);
        assert_eq!(grad_t_wrt_t(1.0, 1.0, true), 0.5);
        assert_eq!(grad_t_wrt_t(1.0, 1.0, false), 0.0);
        assert_eq!(grad_t_wrt_t(0.0, 3.0, true), 0.0);
    }

    #[test]
    fn local_derivatives_match_perturbation() {
        // t1 = (2 + w t0) / (1 + w) at w = 1, t0 = 0.5
        let t1 = |w: f64, t0: f64| (2.0 + w * t0) / (1.0 + w);
        let h = 1e-6;
        let dw = (t1(1.0 + h, 0.5) - t1(1.0 - h, 0.5)) / (2.0 * h);
        let dt = (t1(1.0, 0.5 + h) - t1(1.0, 0.5 - h)) / (2.0 * h);
        assert!((dw - grad_t_wrt_w(0.5, 1.25, 1.0)).abs() < 1e-9);
        assert!((dt - grad_t_wrt_t(1.0, 1.0, true)).abs() < 1e-9);
    }

    fn random_net(rng: &mut ChaCha8Rng) -> (Network, Vec<Array2<f64>>, Array2<f64>, Vec<usize>) {
        let net = Network::new(&NetworkConfig::mlp(&[8, 6, 5, 3])).unwrap();
        let ws = net
            .stages()
            .iter()
            .map(|s| Array2::from_shape_fn(s.weight_shape(), |_| rng.random_range(-0.5..0.9)))
            .collect();
        let x = Array2::from_shape_fn((6, 8), |_| rng.random_range(0.0..1.0));
        let y = (0..6).map(|_| rng.random_range(0..3)).collect();
        (net, ws, x, y)
    }

    #[test]
    fn dual_mode_with_symmetric_feedback_is_bitwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (net, w, x, y) = random_net(&mut rng);
        let fp = net.forward(&w, x.view()).unwrap();
        let b = w.clone();
        let oracle = backward_pass(&net, &fp, &w, &w, &y).unwrap();
        let dual = backward_pass(&net, &fp, &w, &b, &y).unwrap();
        assert_eq!(oracle, dual);
    }

    #[test]
    fn negated_feedback_negates_hidden_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::new(&NetworkConfig::mlp(&[6, 5, 3])).unwrap();
        let w: Vec<_> = net
            .stages()
            .iter()
            .map(|s| Array2::from_shape_fn(s.weight_shape(), |_| rng.random_range(-0.3..0.6)))
            .collect();
        let x = Array2::from_shape_fn((4, 6), |_| rng.random_range(0.0..1.0));
        let y = vec![0, 1, 2, 1];
        let fp = net.forward(&w, x.view()).unwrap();
        let b: Vec<_> = w.iter().map(|m| -m).collect();
        let oracle = backward_pass(&net, &fp, &w, &w, &y).unwrap();
        let dual = backward_pass(&net, &fp, &w, &b, &y).unwrap();
        assert_eq!(oracle.grads[1], dual.grads[1]);
        assert_eq!(oracle.deltas[1], dual.deltas[1]);
        // δ^1_i = Σ_j δ^2_j E_ij / (1 + Σ_{C_j} E_ij), evaluated explicitly with E = -W
        let t2 = fp.trace.layers[2].clone();
        for s_ in 0..4 {
            for i in 0..5 {
                let expect: f64 = (0..3)
                    .filter(|&j| in_gradient_window(t2[[s_, j]], 2, 1.0))
                    .map(|j| {
                        let sum_w: f64 = (0..5)
                            .filter(|&k| fp.trace.layers[1][[s_, k]].is_finite())
                            .map(|k| w[1][[k, j]])
                            .sum();
                        dual.deltas[1][[s_, j]] * -w[1][[i, j]] / (1.0 - sum_w)
                    })
                    .sum();
                let expect = if fp.trace.layers[1][[s_, i]].is_finite() { expect } else { 0.0 };
                assert!((dual.deltas[0][[s_, i]] - expect).abs() < 1e-12);
            }
        }
        assert!(oracle.deltas[0].iter().zip(dual.deltas[0].iter()).any(|(a, b)| a != b));
    }

    #[test]
    fn silent_and_window_start_neurons_get_zero_gradient() {
        let net = Network::new(&NetworkConfig::mlp(&[2, 3, 2])).unwrap();
        // neuron 0 fires at window start, neuron 1 never fires, neuron 2 crosses
        let w1 = array![[3.0, -4.0, 0.4], [3.0, -4.0, 0.3]];
        let w2 = array![[0.2, 0.1], [0.3, -0.2], [0.5, 0.4]];
        let x = array![[0.1, 0.2]];
        let fp = net.forward(&[w1.clone(), w2.clone()], x.view()).unwrap();
        let h = fp.trace.layers[1].row(0).to_vec();
        assert_eq!(h[0], 1.0);
        assert!(h[1].is_infinite());
        assert!(h[2] > 1.0 && h[2] < 2.0);
        let st = backward_pass(&net, &fp, &[w1.clone(), w2.clone()], &[w1, w2], &[1]).unwrap();
        for i in 0..2 {
            assert_eq!(st.grads[0][[i, 0]], 0.0);
            assert_eq!(st.grads[0][[i, 1]], 0.0);
            assert_ne!(st.grads[0][[i, 2]], 0.0);
        }
        // silent hidden neuron is not a causal input of layer 2
        assert_eq!(st.grads[1].row(1).to_vec(), vec![0.0, 0.0]);
        assert_eq!(st.deltas[0][[0, 1]], 0.0);
    }

    #[test]
    fn output_errors_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (net, w, x, y) = random_net(&mut rng);
        let fp = net.forward(&w, x.view()).unwrap();
        let st = backward_pass(&net, &fp, &w, &w, &y).unwrap();
        for row in st.deltas[2].outer_iter() {
            assert!(row.sum().abs() < 1e-15);
        }
    }

    #[test]
    fn batch_gradient_is_sum_of_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (net, w, x, y) = random_net(&mut rng);
        let fp = net.forward(&w, x.view()).unwrap();
        let batch = backward_pass(&net, &fp, &w, &w, &y).unwrap();
        let mut acc: Vec<Array2<f64>> = w.iter().map(|m| Array2::zeros(m.dim())).collect();
        for b in 0..x.nrows() {
            let xb = x.slice(ndarray::s![b..b + 1, ..]);
            let fpb = net.forward(&w, xb).unwrap();
            let st = backward_pass(&net, &fpb, &w, &w, &y[b..b + 1]).unwrap();
            for (a, g) in acc.iter_mut().zip(&st.grads) {
                *a += g;
            }
        }
        for (a, g) in acc.iter().zip(&batch.grads) {
            for (p, q) in a.iter().zip(g.iter()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mismatched_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (net, w, x, _) = random_net(&mut rng);
        let fp = net.forward(&w, x.view()).unwrap();
        assert!(backward_pass(&net, &fp, &w, &w, &[0, 1]).is_err());
        assert!(backward_pass(&net, &fp, &w, &w[..2], &[0; 6]).is_err());
    }
}
