//! ReLPSP neuron with a dynamic firing threshold.
//!
//! Layer `l` (the encoding layer is layer 0) may only fire inside the window
//! `[T_w·l, T_w·(l+1)]`. Because every input of layer `l` fired in an earlier
//! window, the membrane potential is linear in `t` over the whole window and
//! the first threshold crossing has a closed form.

use crate::error::{Error, Result};

/// Spike time of a neuron that never fires.
pub const NO_SPIKE: f64 = f64::INFINITY;

/// `|1 + ΣW|` below this value is treated as a non-firing neuron.
pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// Which branch of the closed-form spike time a neuron took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FiringCase {
    /// Potential already met the threshold at the window start.
    WindowStart,
    /// Crossing strictly inside the window (or exactly at its end).
    Crossing,
    Silent,
}

/// Time-to-first-spike encoding of an intensity in `[0, 1]`.
pub fn encode_ttfs(x: f64, time_window: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("intensity {x} outside [0, 1]")));
    }
    Ok(time_window * (1.0 - x))
}

/// Threshold of layer `layer` at time `t`; `+inf` outside the layer's window.
pub fn dft_threshold(layer: usize, t: f64, time_window: f64) -> f64 {
    let start = time_window * layer as f64;
    let end = time_window * (layer + 1) as f64;
    if (start..=end).contains(&t) {
        end - t
    } else {
        f64::INFINITY
    }
}

/// Spike time from the causal sums of one neuron.
///
/// `weight_sum = Σ W_i` and `weighted_times = Σ W_i·t_i`, both over the
/// inputs that fired (all of which precede the window of `layer`).
#[inline]
pub fn spike_time_from_sums(
    weight_sum: f64,
    weighted_times: f64,
    layer: usize,
    time_window: f64,
) -> (f64, FiringCase) {
    let start = time_window * layer as f64;
    let end = start + time_window;
    // V(start) = Σ W_i (start - t_i); θ(start) = T_w
    let v_start = start * weight_sum - weighted_times;
    if v_start >= time_window {
        return (start, FiringCase::WindowStart);
    }
    let denom = 1.0 + weight_sum;
    if denom.abs() < DENOMINATOR_GUARD || denom < 0.0 {
        return (NO_SPIKE, FiringCase::Silent);
    }
    let t = (end + weighted_times) / denom;
    if t > start && t <= end {
        (t, FiringCase::Crossing)
    } else {
        (NO_SPIKE, FiringCase::Silent)
    }
}

/// Classifies a recorded spike time of layer `layer`.
///
/// Gradients only flow through spikes strictly inside the window, so a
/// crossing that lands exactly on the window end is reported as `Crossing`
/// here but carries zero gradient (see [`in_gradient_window`]).
#[inline]
pub fn firing_case(t: f64, layer: usize, time_window: f64) -> FiringCase {
    let start = time_window * layer as f64;
    if t.is_infinite() {
        FiringCase::Silent
    } else if t <= start {
        FiringCase::WindowStart
    } else {
        FiringCase::Crossing
    }
}

/// True when `t` lies strictly inside the window of `layer`.
#[inline]
pub fn in_gradient_window(t: f64, layer: usize, time_window: f64) -> bool {
    let start = time_window * layer as f64;
    t > start && t < start + time_window
}

/// Spike times of one layer for a single sample.
///
/// `weights` is row-major `[inputs][outputs]`. Non-firing inputs carry
/// [`NO_SPIKE`] and contribute nothing. Inputs with `t_i >= t_j` are not
/// causal; with non-overlapping windows this only excludes inputs that
/// coincide with a window-start spike, where their kernel is zero anyway.
pub fn layer_spike_times(
    input_times: &[f64],
    weights: &[f64],
    outputs: usize,
    layer: usize,
    time_window: f64,
) -> Result<Vec<f64>> {
    if layer == 0 {
        return Err(Error::Domain("layer 0 is the encoding layer".into()));
    }
    if weights.len() != input_times.len() * outputs {
        return Err(Error::Shape(format!(
            "weights hold {} entries, expected {}x{}",
            weights.len(),
            input_times.len(),
            outputs
        )));
    }
    let out = (0..outputs)
        .map(|j| {
            let (mut s, mut n) = (0.0, 0.0);
            for (i, &t) in input_times.iter().enumerate() {
                if t.is_finite() {
                    let w = weights[i * outputs + j];
                    s += w;
                    n += w * t;
                }
            }
            spike_time_from_sums(s, n, layer, time_window).0
        })
        .collect();
    Ok(out)
}
