//! Datasets: IDX files, synthetic tasks, splits and TTFS encoding.

use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Samples with features in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `[samples, features]`.
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    /// `[channels, height, width]` of one sample.
    pub shape: [usize; 3],
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, shape: [usize; 3], num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} samples but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.ncols() != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "{} features do not match shape {:?}",
                features.ncols(),
                shape
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Domain(format!("label {bad} >= num_classes {num_classes}")));
        }
        if let Some(bad) = features.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("feature value {bad} outside [0, 1]")));
        }
        Ok(Dataset {
            features,
            labels,
            shape,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            shape: self.shape,
            num_classes: self.num_classes,
        }
    }
}

/// TTFS-encoded samples ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    /// Spike times of the encoding layer, `[samples, features]`.
    pub times: Array2<f64>,
    pub labels: Vec<usize>,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Maps every feature `x` to `T_w·(1 − x)`.
pub fn encode_dataset(d: &Dataset, time_window: f64) -> EncodedDataset {
    EncodedDataset {
        times: d.features.mapv(|x| time_window * (1.0 - x)),
        labels: d.labels.clone(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'a str,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let avail = self.bytes.len() - self.pos;
        if avail < n {
            return Err(Error::Format {
                offset: self.pos,
                reason: format!("{} truncated: expected {n} bytes, {avail} available", self.what),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Parses an IDX image file (`u8` pixels, `[n, rows, cols]`), scaling pixels to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Array2<f64>, [usize; 3])> {
    let mut r = Reader { bytes, pos: 0, what: "image file" };
    let magic = r.u32()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let n = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let px = r.take(n * rows * cols)?;
    let features = Array2::from_shape_vec((n, rows * cols), px.iter().map(|&p| p as f64 / 255.0).collect())
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok((features, [1, rows, cols]))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let mut r = Reader { bytes, pos: 0, what: "label file" };
    let magic = r.u32()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format {
            offset: 0,
            reason: format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let n = r.u32()? as usize;
    Ok(r.take(n)?.iter().map(|&b| b as usize).collect())
}

/// Loads an IDX image/label pair. `num_classes` defaults to `max(label) + 1`.
pub fn load_idx(images: &Path, labels: &Path, num_classes: Option<usize>) -> Result<Dataset> {
    let (features, shape) = parse_idx_images(&fs::read(images)?)?;
    let labels = parse_idx_labels(&fs::read(labels)?)?;
    if features.nrows() != labels.len() {
        return Err(Error::Format {
            offset: 4,
            reason: format!(
                "count mismatch: {} images but {} labels",
                features.nrows(),
                labels.len()
            ),
        });
    }
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Dataset::new(features, labels, shape, k)
}

pub fn idx_image_bytes(d: &Dataset) -> Vec<u8> {
    let [_, rows, cols] = d.shape;
    let (rows, cols) = if d.shape[0] == 1 { (rows, cols) } else { (1, d.features.ncols()) };
    let mut out = Vec::with_capacity(16 + d.features.len());
    for v in [IDX_IMAGES_MAGIC, d.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend(d.features.iter().map(|&x| (x * 255.0).round() as u8));
    out
}

pub fn idx_label_bytes(d: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + d.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(d.len() as u32).to_be_bytes());
    out.extend(d.labels.iter().map(|&y| y as u8));
    out
}

/// Writes features quantized to `u8` and labels in IDX format.
pub fn write_idx(d: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    if d.num_classes > 256 {
        return Err(Error::Domain("IDX labels are u8".into()));
    }
    fs::write(images, idx_image_bytes(d))?;
    fs::write(labels, idx_label_bytes(d))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Two classes in `[0,1]²` on either side of `x + y = 1`, separated by a 0.1-wide gap.
    TwoGaussians,
    /// Label is `(x > ½) xor (y > ½)`.
    XorQuadrants,
    /// `classes` Gaussian blobs in `dim` dimensions.
    Blobs { classes: usize, dim: usize },
}

/// Margin (full gap width) between the two-Gaussians classes.
pub const TWO_GAUSSIANS_MARGIN: f64 = 0.1;

pub fn make_synthetic(kind: SyntheticKind, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Domain("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        SyntheticKind::TwoGaussians => {
            let noise: Normal<f64> = Normal::new(0.0, 0.12).unwrap();
            let half_gap = TWO_GAUSSIANS_MARGIN / 2.0 * std::f64::consts::SQRT_2;
            let mut feats = Vec::with_capacity(2 * n);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let y = i % 2;
                let c: f64 = if y == 0 { 0.3 } else { 0.7 };
                loop {
                    let a = (c + noise.sample(&mut rng)).clamp(0.0, 1.0);
                    let b = (c + noise.sample(&mut rng)).clamp(0.0, 1.0);
                    let side = a + b - 1.0;
                    let ok = if y == 0 { side <= -half_gap } else { side >= half_gap };
                    if ok {
                        feats.extend([a, b]);
                        break;
                    }
                }
                labels.push(y);
            }
            Dataset::new(Array2::from_shape_vec((n, 2), feats).unwrap(), labels, [1, 1, 2], 2)
        }
        SyntheticKind::XorQuadrants => {
            let mut feats = Vec::with_capacity(2 * n);
            let mut labels = Vec::with_capacity(n);
            for _ in 0..n {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                feats.extend([a, b]);
                labels.push(usize::from((a > 0.5) ^ (b > 0.5)));
            }
            Dataset::new(Array2::from_shape_vec((n, 2), feats).unwrap(), labels, [1, 1, 2], 2)
        }
        SyntheticKind::Blobs { classes, dim } => {
            if classes == 0 || dim == 0 {
                return Err(Error::Domain("blobs need classes >= 1 and dim >= 1".into()));
            }
            let centres = Array2::from_shape_simple_fn((classes, dim), || rng.random_range(0.2f64..0.8));
            let noise: Normal<f64> = Normal::new(0.0, 0.06).unwrap();
            let mut feats = Vec::with_capacity(dim * n);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let y = i % classes;
                for d in 0..dim {
                    feats.push((centres[[y, d]] + noise.sample(&mut rng)).clamp(0.0, 1.0));
                }
                labels.push(y);
            }
            Dataset::new(Array2::from_shape_vec((n, dim), feats).unwrap(), labels, [1, 1, dim], classes)
        }
    }
}

/// Seeded random holdout: returns `(train, val)` index sets with
/// `|val| = round(fraction·n)`; both sorted ascending.
pub fn holdout_split<R: Rng + ?Sized>(n: usize, fraction: f64, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_val = ((fraction * n as f64).round() as usize).min(n);
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}
