//! im2col helpers for 3x3 same-padded convolutions and temporal max-pooling.

use ndarray::{Array2, ArrayView2};

use crate::network::{CONV_KERNEL, POOL_KERNEL};
use crate::neuron::NO_SPIKE;

/// Unfolds `[batch, C·H·W]` into `[batch·H·W, C·9]` patches. Padding reads as 0.
pub fn im2col(x: ArrayView2<f64>, channels: usize, height: usize, width: usize) -> Array2<f64> {
    let batch = x.nrows();
    let hw = height * width;
    let k = CONV_KERNEL;
    let mut cols = Array2::zeros((batch * hw, channels * k * k));
    for b in 0..batch {
        let row = x.row(b);
        for y in 0..height {
            for xx in 0..width {
                let mut patch = cols.row_mut(b * hw + y * width + xx);
                for c in 0..channels {
                    for ky in 0..k {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= height as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let sx = xx as isize + kx as isize - 1;
                            if sx < 0 || sx >= width as isize {
                                continue;
                            }
                            patch[c * k * k + ky * k + kx] =
                                row[c * hw + sy as usize * width + sx as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto `[batch, C·H·W]`.
pub fn col2im(
    cols: ArrayView2<f64>,
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
) -> Array2<f64> {
    let hw = height * width;
    let k = CONV_KERNEL;
    let mut x = Array2::zeros((batch, channels * hw));
    for b in 0..batch {
        let mut row = x.row_mut(b);
        for y in 0..height {
            for xx in 0..width {
                let patch = cols.row(b * hw + y * width + xx);
                for c in 0..channels {
                    for ky in 0..k {
                        let sy = y as isize + ky as isize - 1;
                        if sy < 0 || sy >= height as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let sx = xx as isize + kx as isize - 1;
                            if sx < 0 || sx >= width as isize {
                                continue;
                            }
                            row[c * hw + sy as usize * width + sx as usize] +=
                                patch[c * k * k + ky * k + kx];
                        }
                    }
                }
            }
        }
    }
    x
}

/// `[batch·HW, C]` (conv output rows) to `[batch, C·HW]`.
pub fn rows_to_channel_major(rows: ArrayView2<f64>, batch: usize, channels: usize, hw: usize) -> Array2<f64> {
    Array2::from_shape_fn((batch, channels * hw), |(b, f)| rows[[b * hw + f % hw, f / hw]])
}

/// `[batch, C·HW]` to `[batch·HW, C]`.
pub fn channel_major_to_rows(x: ArrayView2<f64>, channels: usize, hw: usize) -> Array2<f64> {
    Array2::from_shape_fn((x.nrows() * hw, channels), |(r, c)| x[[r / hw, c * hw + r % hw]])
}

/// Earliest spike of each 2x2 window (stride 2) and the flat input index that won.
///
/// Ties, including all-silent windows, go to the lowest flat index.
pub fn temporal_maxpool(
    x: ArrayView2<f64>,
    channels: usize,
    height: usize,
    width: usize,
) -> (Array2<f64>, Array2<u32>) {
    let (ph, pw) = (height / POOL_KERNEL, width / POOL_KERNEL);
    let n_out = channels * ph * pw;
    let mut out = Array2::from_elem((x.nrows(), n_out), NO_SPIKE);
    let mut arg = Array2::zeros((x.nrows(), n_out));
    for b in 0..x.nrows() {
        let row = x.row(b);
        for c in 0..channels {
            for py in 0..ph {
                for px in 0..pw {
                    let o = c * ph * pw + py * pw + px;
                    let mut best = usize::MAX;
                    // window scanned in row-major order, which is increasing flat index
                    for dy in 0..POOL_KERNEL {
                        for dx in 0..POOL_KERNEL {
                            let idx = c * height * width
                                + (py * POOL_KERNEL + dy) * width
                                + px * POOL_KERNEL
                                + dx;
                            if best == usize::MAX || row[idx] < row[best] {
                                best = idx;
                            }
                        }
                    }
                    out[[b, o]] = row[best];
                    arg[[b, o]] = best as u32;
                }
            }
        }
    }
    (out, arg)
}

/// Routes pooled-output errors to the winning pre-pool neurons.
pub fn maxpool_backward(delta_pooled: ArrayView2<f64>, argmin: ArrayView2<u32>, pre_pool_size: usize) -> Array2<f64> {
    let mut d = Array2::zeros((delta_pooled.nrows(), pre_pool_size));
    for b in 0..delta_pooled.nrows() {
        for (o, &idx) in argmin.row(b).iter().enumerate() {
            d[[b, idx as usize]] += delta_pooled[[b, o]];
        }
    }
    d
}
