//! Network topology and the batched forward pass.
//!
//! Spike times of a batch are stored as `[batch, neurons]` matrices. Convolutional
//! activations are flattened channel-major (`c·H·W + y·W + x`). Dense weights are
//! `[inputs, outputs]`; conv weights are `[in_channels·9, out_channels]` with rows
//! ordered `(c, ky, kx)`.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::conv;
use crate::error::{Error, Result};
use crate::neuron::spike_time_from_sums;

pub const CONV_KERNEL: usize = 3;
pub const POOL_KERNEL: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    /// 3x3, stride 1, zero padding preserving the spatial size.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
    },
    /// 2x2, stride 2 temporal max-pool, fused with the preceding conv layer.
    MaxPool2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// `[channels, height, width]` of the encoded input.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    #[serde(default = "default_time_window")]
    pub time_window: f64,
    pub num_classes: usize,
}

fn default_time_window() -> f64 {
    1.0
}

impl NetworkConfig {
    /// Fully-connected network `sizes[0] -> sizes[1] -> ...`.
    pub fn mlp(sizes: &[usize]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| LayerSpec::Dense {
                inputs: w[0],
                outputs: w[1],
            })
            .collect();
        NetworkConfig {
            input_shape: [1, 1, sizes[0]],
            layers,
            time_window: 1.0,
            num_classes: *sizes.last().unwrap(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_shape.iter().product()
    }
}

/// A trainable layer with its resolved shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv {
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        pool: bool,
    },
}

impl Stage {
    pub fn weight_shape(&self) -> (usize, usize) {
        match *self {
            Stage::Dense { inputs, outputs } => (inputs, outputs),
            Stage::Conv {
                in_channels,
                out_channels,
                ..
            } => (in_channels * CONV_KERNEL * CONV_KERNEL, out_channels),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight_shape().0
    }

    pub fn input_size(&self) -> usize {
        match *self {
            Stage::Dense { inputs, .. } => inputs,
            Stage::Conv {
                in_channels,
                height,
                width,
                ..
            } => in_channels * height * width,
        }
    }

    /// Neurons before pooling.
    pub fn neuron_count(&self) -> usize {
        match *self {
            Stage::Dense { outputs, .. } => outputs,
            Stage::Conv {
                out_channels,
                height,
                width,
                ..
            } => out_channels * height * width,
        }
    }

    /// Size of the layer output seen by the next layer.
    pub fn output_size(&self) -> usize {
        match *self {
            Stage::Conv {
                pool: true,
                out_channels,
                height,
                width,
                ..
            } => out_channels * (height / POOL_KERNEL) * (width / POOL_KERNEL),
            _ => self.neuron_count(),
        }
    }
}

/// Validated network: trainable stages `1..=L` plus the time window.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    stages: Vec<Stage>,
    input_size: usize,
    time_window: f64,
    num_classes: usize,
}

impl Network {
    pub fn new(config: &NetworkConfig) -> Result<Self> {
        if !(config.time_window > 0.0) || !config.time_window.is_finite() {
            return Err(Error::config("time_window", "must be a positive finite number"));
        }
        if config.num_classes == 0 {
            return Err(Error::config("num_classes", "must be positive"));
        }
        let [mut c, mut h, mut w] = config.input_shape;
        if c * h * w == 0 {
            return Err(Error::config("input_shape", "all dimensions must be positive"));
        }
        let mut flat = false;
        let mut stages: Vec<Stage> = Vec::new();
        for (idx, spec) in config.layers.iter().enumerate() {
            let field = format!("layers[{idx}]");
            match *spec {
                LayerSpec::Dense { inputs, outputs } => {
                    if inputs != c * h * w {
                        return Err(Error::config(
                            field,
                            format!("dense layer expects {inputs} inputs but receives {}", c * h * w),
                        ));
                    }
                    if outputs == 0 {
                        return Err(Error::config(field, "outputs must be positive"));
                    }
                    stages.push(Stage::Dense { inputs, outputs });
                    flat = true;
                    (c, h, w) = (1, 1, outputs);
                }
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                } => {
                    if flat {
                        return Err(Error::config(field, "conv2d cannot follow a dense layer"));
                    }
                    if in_channels != c {
                        return Err(Error::config(
                            field,
                            format!("conv2d expects {in_channels} channels but receives {c}"),
                        ));
                    }
                    if out_channels == 0 {
                        return Err(Error::config(field, "out_channels must be positive"));
                    }
                    stages.push(Stage::Conv {
                        in_channels,
                        out_channels,
                        height: h,
                        width: w,
                        pool: false,
                    });
                    c = out_channels;
                }
                LayerSpec::MaxPool2d => match stages.last_mut() {
                    Some(Stage::Conv { pool: pool @ false, height, width, .. }) if !flat => {
                        if *height % POOL_KERNEL != 0 || *width % POOL_KERNEL != 0 {
                            return Err(Error::config(
                                field,
                                format!("spatial size {}x{} not divisible by 2", height, width),
                            ));
                        }
                        *pool = true;
                        h /= POOL_KERNEL;
                        w /= POOL_KERNEL;
                    }
                    _ => {
                        return Err(Error::config(
                            field,
                            "max_pool2d must directly follow a conv2d layer",
                        ))
                    }
                },
            }
        }
        match stages.last() {
            Some(Stage::Dense { outputs, .. }) if *outputs == config.num_classes => {}
            _ => {
                return Err(Error::config(
                    "layers",
                    format!(
                        "final layer must be dense with {} outputs (num_classes)",
                        config.num_classes
                    ),
                ))
            }
        }
        Ok(Network {
            stages,
            input_size: config.input_size(),
            time_window: config.time_window,
            num_classes: config.num_classes,
        })
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// Number of trainable layers `L`.
    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn time_window(&self) -> f64 {
        self.time_window
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn weight_count(&self) -> usize {
        self.stages
            .iter()
            .map(|s| {
                let (r, c) = s.weight_shape();
                r * c
            })
            .sum()
    }

    /// Latest admissible output spike time `T_w·(L+1)`.
    pub fn output_deadline(&self) -> f64 {
        self.time_window * (self.depth() + 1) as f64
    }

    pub fn check_weights(&self, weights: &[Array2<f64>]) -> Result<()> {
        if weights.len() != self.depth() {
            return Err(Error::Shape(format!(
                "{} weight tensors for {} layers",
                weights.len(),
                self.depth()
            )));
        }
        for (l, (w, s)) in weights.iter().zip(&self.stages).enumerate() {
            if w.dim() != s.weight_shape() {
                return Err(Error::Shape(format!(
                    "layer {} weights are {:?}, expected {:?}",
                    l + 1,
                    w.dim(),
                    s.weight_shape()
                )));
            }
        }
        Ok(())
    }

    /// Runs all layers on a batch of encoded inputs (`[batch, input_size]`).
    pub fn forward(&self, weights: &[Array2<f64>], input: ArrayView2<f64>) -> Result<ForwardPass> {
        self.check_weights(weights)?;
        if input.ncols() != self.input_size {
            return Err(Error::Shape(format!(
                "input has {} features, network expects {}",
                input.ncols(),
                self.input_size
            )));
        }
        let mut layers = Vec::with_capacity(self.depth() + 1);
        let mut caches = Vec::with_capacity(self.depth());
        layers.push(input.to_owned());
        for (idx, (stage, w)) in self.stages.iter().zip(weights).enumerate() {
            let l = idx + 1;
            let x = layers.last().unwrap().view();
            let sums = causal_weight_sums(stage, x, w.view());
            let weighted = weighted_time_sums(stage, x, w.view());
            let times = self.fire(stage, &sums, &weighted, l, x.nrows());
            let (out, pool) = match stage {
                Stage::Conv {
                    out_channels,
                    height,
                    width,
                    pool: true,
                    ..
                } => {
                    let (pooled, argmin) =
                        conv::temporal_maxpool(times.view(), *out_channels, *height, *width);
                    (pooled, Some(PoolCache { pre_pool: times, argmin }))
                }
                _ => (times, None),
            };
            layers.push(out);
            caches.push(LayerCache {
                weight_sums: sums,
                pool,
            });
        }
        Ok(ForwardPass {
            trace: SpikeTrace { layers },
            caches,
        })
    }

    fn fire(
        &self,
        stage: &Stage,
        sums: &Array2<f64>,
        weighted: &Array2<f64>,
        layer: usize,
        batch: usize,
    ) -> Array2<f64> {
        let tw = self.time_window;
        let mut times = Array2::zeros(sums.dim());
        ndarray::Zip::from(&mut times)
            .and(sums)
            .and(weighted)
            .for_each(|t, &s, &n| *t = spike_time_from_sums(s, n, layer, tw).0);
        match *stage {
            Stage::Dense { .. } => times,
            Stage::Conv {
                out_channels,
                height,
                width,
                ..
            } => conv::rows_to_channel_major(times.view(), batch, out_channels, height * width),
        }
    }
}

/// Pre-pool spike times and argmin routing of a conv layer followed by pooling.
#[derive(Debug, Clone)]
pub struct PoolCache {
    pub pre_pool: Array2<f64>,
    /// Per pooled output, the flat pre-pool index of the earliest spike.
    pub argmin: Array2<u32>,
}

#[derive(Debug, Clone)]
pub struct LayerCache {
    /// `Σ_{i∈C_j} W_ij` under the forward weights, in the stage's native layout
    /// (`[batch, out]` dense, `[batch·H·W, out_channels]` conv).
    pub weight_sums: Array2<f64>,
    pub pool: Option<PoolCache>,
}

/// Spike times for layers `0..=L`; `layers[0]` is the encoded input.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrace {
    pub layers: Vec<Array2<f64>>,
}

impl SpikeTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.layers.last().unwrap()
    }

    /// Trace of one sample as plain vectors.
    pub fn sample(&self, b: usize) -> Vec<Vec<f64>> {
        self.layers.iter().map(|l| l.row(b).to_vec()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub trace: SpikeTrace,
    pub caches: Vec<LayerCache>,
}

impl ForwardPass {
    pub fn batch_size(&self) -> usize {
        self.trace.layers[0].nrows()
    }

    /// Times emitted by the neurons of layer `l` (pre-pool for pooled conv layers).
    pub fn neuron_times(&self, l: usize) -> &Array2<f64> {
        match &self.caches[l - 1].pool {
            Some(p) => &p.pre_pool,
            None => &self.trace.layers[l],
        }
    }
}

/// Input times with silent inputs replaced by zero.
pub(crate) fn finite_or_zero(x: ArrayView2<f64>) -> Array2<f64> {
    x.mapv(|t| if t.is_finite() { t } else { 0.0 })
}

/// `Σ_{i∈C_j} E_ij` for every sample and output neuron under weights `e`.
///
/// Shared by the forward pass and by error propagation so that the same
/// weights always yield bit-identical sums.
pub fn causal_weight_sums(stage: &Stage, input: ArrayView2<f64>, e: ArrayView2<f64>) -> Array2<f64> {
    match *stage {
        Stage::Dense { outputs, .. } => {
            if input.iter().all(|t| t.is_finite()) {
                let colsum = e.sum_axis(Axis(0));
                return colsum.broadcast((input.nrows(), outputs)).unwrap().to_owned();
            }
            // a mask product rather than colsum minus silent rows: an all-silent
            // input must give an exact zero
            let mask = input.mapv(|t| if t.is_finite() { 1.0 } else { 0.0 });
            mask.dot(&e)
        }
        Stage::Conv {
            in_channels,
            height,
            width,
            ..
        } => {
            let mask = input.mapv(|t| if t.is_finite() { 1.0 } else { 0.0 });
            let cols = conv::im2col(mask.view(), in_channels, height, width);
            cols.dot(&e)
        }
    }
}

/// `Σ_{i∈C_j} W_ij·t_i` for every sample and output neuron.
pub fn weighted_time_sums(stage: &Stage, input: ArrayView2<f64>, w: ArrayView2<f64>) -> Array2<f64> {
    let t0 = finite_or_zero(input);
    match *stage {
        Stage::Dense { .. } => t0.dot(&w),
        Stage::Conv {
            in_channels,
            height,
            width,
            ..
        } => conv::im2col(t0.view(), in_channels, height, width).dot(&w),
    }
}

/// Single-layer forward for one sample, matching [`crate::neuron::layer_spike_times`].
pub fn forward_single(
    net: &Network,
    weights: &[Array2<f64>],
    input: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let x = ArrayView2::from_shape((1, input.len()), input)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok(net.forward(weights, x)?.trace.sample(0))
}
