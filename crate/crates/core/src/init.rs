use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::network::{Network, Stage};

/// Kaiming-normal draw: entries ~ N(0, 2 / fan_in).
pub fn kaiming_normal<R: Rng + ?Sized>(shape: (usize, usize), fan_in: usize, rng: &mut R) -> Array2<f64> {
    let std = (2.0 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("finite std");
    Array2::from_shape_simple_fn(shape, || normal.sample(rng))
}

pub fn kaiming_init<R: Rng + ?Sized>(stage: &Stage, rng: &mut R) -> Array2<f64> {
    kaiming_normal(stage.weight_shape(), stage.fan_in(), rng)
}

/// Forward weights for every trainable layer, drawn in layer order.
pub fn init_weights<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Vec<Array2<f64>> {
    net.stages().iter().map(|s| kaiming_init(s, rng)).collect()
}
