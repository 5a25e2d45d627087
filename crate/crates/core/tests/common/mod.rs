//! Independent oracles and generators shared by the integration suites.
#![allow(dead_code)]

pub mod props;

use std::path::PathBuf;

use fbp_core::data::{encode_dataset, load_idx, EncodedDataset};
use fbp_core::Network;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Membrane potential of output `j` at time `t`, summed input by input.
pub fn membrane(inputs: &[f64], weights: &[f64], outputs: usize, j: usize, t: f64) -> f64 {
    inputs
        .iter()
        .enumerate()
        .map(|(i, &ti)| {
            let kernel = if t > ti { t - ti } else { 0.0 };
            weights[i * outputs + j] * kernel
        })
        .sum()
}

/// Dynamic firing threshold, written out independently of the library.
pub fn threshold(layer: usize, t: f64, tw: f64) -> f64 {
    let (lo, hi) = (tw * layer as f64, tw * (layer + 1) as f64);
    if t >= lo && t <= hi {
        hi - t
    } else {
        f64::INFINITY
    }
}

/// Fixed-step simulation: first grid time in the window where `V ≥ θ`.
pub fn simulate_layer(inputs: &[f64], weights: &[f64], outputs: usize, layer: usize, tw: f64, steps: usize) -> Vec<f64> {
    let start = tw * layer as f64;
    (0..outputs)
        .map(|j| {
            for m in 0..=steps {
                let t = if m == steps { start + tw } else { start + tw * m as f64 / steps as f64 };
                if membrane(inputs, weights, outputs, j, t) >= threshold(layer, t, tw) {
                    return t;
                }
            }
            f64::INFINITY
        })
        .collect()
}

/// A single dense layer: input spike times from the previous window, weights, geometry.
#[derive(Debug, Clone)]
pub struct LayerCase {
    pub layer: usize,
    pub tw: f64,
    pub inputs: Vec<f64>,
    pub weights: Vec<f64>,
    pub outputs: usize,
}

pub fn layer_case() -> impl Strategy<Value = LayerCase> {
    (1usize..5, prop_oneof![Just(0.5), Just(1.0), Just(2.0)], 1usize..9, 1usize..7, any::<u64>()).prop_map(
        |(layer, tw, n_in, outputs, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo = tw * (layer - 1) as f64;
            let inputs = (0..n_in)
                .map(|_| {
                    if rng.random_bool(0.2) {
                        f64::INFINITY
                    } else {
                        lo + tw * rng.random::<f64>()
                    }
                })
                .collect();
            let scale = [0.3, 1.0, 3.0][rng.random_range(0..3)];
            let weights = (0..n_in * outputs).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
            LayerCase {
                layer,
                tw,
                inputs,
                weights,
                outputs,
            }
        },
    )
}

/// Random small MLP with weights at a random gain, and a batch of inputs in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct NetCase {
    pub sizes: Vec<usize>,
    pub tw: f64,
    pub weights: Vec<Array2<f64>>,
    pub inputs: Array2<f64>,
}

pub fn net_case() -> impl Strategy<Value = NetCase> {
    (
        proptest::collection::vec(1usize..9, 2..5),
        prop_oneof![Just(0.5), Just(1.0), Just(2.0)],
        1usize..5,
        any::<u64>(),
    )
        .prop_map(|(sizes, tw, batch, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gain = [0.5, 1.0, 2.0, 4.0][rng.random_range(0..4)];
            let weights = sizes
                .windows(2)
                .map(|p| {
                    let n = Normal::new(0.0, gain * (2.0 / p[0] as f64).sqrt()).unwrap();
                    Array2::from_shape_simple_fn((p[0], p[1]), || n.sample(&mut rng))
                })
                .collect();
            let inputs = Array2::from_shape_simple_fn((batch, sizes[0]), || rng.random::<f64>());
            NetCase {
                sizes,
                tw,
                weights,
                inputs,
            }
        })
}

pub fn build(case: &NetCase) -> Network {
    let mut cfg = fbp_core::NetworkConfig::mlp(&case.sizes);
    cfg.time_window = case.tw;
    Network::new(&cfg).unwrap()
}

/// Directory holding the four Fashion-MNIST IDX files.
pub fn fashion_dir() -> PathBuf {
    std::env::var_os("FBP_FASHION_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/fashion-mnist"))
}

pub struct Fashion {
    pub train: fbp_core::data::Dataset,
    pub test: fbp_core::data::Dataset,
}

pub fn fashion() -> Result<Fashion, String> {
    let dir = fashion_dir();
    let load = |img: &str, lbl: &str| {
        load_idx(&dir.join(img), &dir.join(lbl), Some(10))
            .map_err(|e| format!("{}: {e} (run scripts/fetch_fashion_mnist.py)", dir.display()))
    };
    Ok(Fashion {
        train: load("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?,
        test: load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?,
    })
}

pub fn encoded_train() -> Result<EncodedDataset, String> {
    Ok(encode_dataset(&fashion()?.train, 1.0))
}
