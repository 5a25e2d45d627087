//! Run configuration: one TOML file describes one run.

use std::path::{Path, PathBuf};

use fbp_core::data::{load_idx, make_synthetic, Dataset, SyntheticKind};
use fbp_core::metrics::MetricsConfig;
use fbp_core::optim::OptimizerConfig;
use fbp_core::trainer::TrainSchedule;
use fbp_core::{LayerSpec, Network, NetworkConfig, TransportStrategy};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub architecture: ArchitectureSpec,
    pub strategy: TransportStrategy,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub schedule: TrainSchedule,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Generated in-process; the first `train_samples` draws train, the rest test.
    Synthetic {
        generator: SyntheticKind,
        train_samples: usize,
        test_samples: usize,
        #[serde(default)]
        data_seed: u64,
    },
    /// IDX files; relative paths resolve against the config file's directory.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_images: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_labels: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        num_classes: Option<usize>,
    },
}

/// Either a named preset or an explicit layer list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_shape: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<LayerSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    #[serde(default = "one")]
    pub time_window: f64,
}

fn one() -> f64 {
    1.0
}

impl ArchitectureSpec {
    pub fn preset(name: &str) -> Self {
        ArchitectureSpec {
            preset: Some(name.to_string()),
            input_shape: None,
            layers: None,
            num_classes: None,
            time_window: 1.0,
        }
    }

    pub fn resolve(&self) -> Result<NetworkConfig, CliError> {
        let invalid = |reason: String| CliError::invalid("architecture", reason);
        let mut cfg = match (&self.preset, &self.layers) {
            (Some(_), Some(_)) => return Err(invalid("`preset` and `layers` are mutually exclusive".into())),
            (None, None) => return Err(invalid("needs either `preset` or `layers`".into())),
            (Some(name), None) => {
                if self.input_shape.is_some() || self.num_classes.is_some() {
                    return Err(invalid("a preset fixes `input_shape` and `num_classes`".into()));
                }
                preset(name).ok_or_else(|| {
                    invalid(format!(
                        "unknown preset `{name}` (expected mlp-784-400-400-10, convnet-small or mlp-<n>-<n>-...)"
                    ))
                })?
            }
            (None, Some(layers)) => {
                let (Some(input_shape), Some(num_classes)) = (self.input_shape, self.num_classes) else {
                    return Err(invalid("a layer list needs `input_shape` and `num_classes`".into()));
                };
                NetworkConfig {
                    input_shape,
                    layers: layers.clone(),
                    time_window: 1.0,
                    num_classes,
                }
            }
        };
        cfg.time_window = self.time_window;
        Network::new(&cfg).map_err(|e| prefix(e, "architecture"))?;
        Ok(cfg)
    }
}

fn preset(name: &str) -> Option<NetworkConfig> {
    if name == "convnet-small" {
        return Some(NetworkConfig {
            input_shape: [1, 28, 28],
            layers: vec![
                LayerSpec::Conv2d {
                    in_channels: 1,
                    out_channels: 16,
                },
                LayerSpec::MaxPool2d,
                LayerSpec::Conv2d {
                    in_channels: 16,
                    out_channels: 32,
                },
                LayerSpec::MaxPool2d,
                LayerSpec::Dense {
                    inputs: 32 * 7 * 7,
                    outputs: 128,
                },
                LayerSpec::Dense {
                    inputs: 128,
                    outputs: 10,
                },
            ],
            time_window: 1.0,
            num_classes: 10,
        });
    }
    let sizes: Vec<usize> = name
        .strip_prefix("mlp-")?
        .split('-')
        .map(|s| s.parse().ok().filter(|&n| n > 0))
        .collect::<Option<_>>()?;
    (sizes.len() >= 2).then(|| NetworkConfig::mlp(&sizes))
}

/// Re-homes a core config error under `section`.
pub(crate) fn prefix(e: fbp_core::Error, section: &str) -> CliError {
    match e {
        fbp_core::Error::Config { field, reason } => {
            let field = if field.starts_with(section) {
                field
            } else {
                format!("{section}.{field}")
            };
            CliError::Invalid { field, reason }
        }
        other => CliError::invalid(section, other.to_string()),
    }
}

pub struct Splits {
    pub train: Dataset,
    pub test: Option<Dataset>,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            DatasetSpec::Synthetic {
                train_samples,
                generator,
                ..
            } => {
                if *train_samples < 2 {
                    return Err(CliError::invalid("dataset.train_samples", "must be at least 2"));
                }
                if let SyntheticKind::Blobs { classes, dim } = generator {
                    if *classes < 2 || *dim == 0 {
                        return Err(CliError::invalid(
                            "dataset.generator",
                            "blobs need classes >= 2 and dim >= 1",
                        ));
                    }
                }
            }
            DatasetSpec::Idx {
                test_images,
                test_labels,
                ..
            } => {
                if test_images.is_some() != test_labels.is_some() {
                    return Err(CliError::invalid(
                        "dataset.test_images",
                        "test_images and test_labels must be given together",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn has_test(&self) -> bool {
        match self {
            DatasetSpec::Synthetic { test_samples, .. } => *test_samples > 0,
            DatasetSpec::Idx { test_images, .. } => test_images.is_some(),
        }
    }

    pub fn load(&self, base: &Path) -> Result<Splits, CliError> {
        match self {
            DatasetSpec::Synthetic {
                generator,
                train_samples,
                test_samples,
                data_seed,
            } => {
                let all = make_synthetic(*generator, train_samples + test_samples, *data_seed)
                    .map_err(|e| prefix(e, "dataset"))?;
                let idx: Vec<usize> = (0..all.len()).collect();
                let (tr, te) = idx.split_at(*train_samples);
                Ok(Splits {
                    train: all.subset(tr),
                    test: (!te.is_empty()).then(|| all.subset(te)),
                })
            }
            DatasetSpec::Idx {
                train_images,
                train_labels,
                test_images,
                test_labels,
                num_classes,
            } => {
                let load = |img: &Path, lbl: &Path| {
                    load_idx(&base.join(img), &base.join(lbl), *num_classes).map_err(|e| {
                        CliError::Runtime(format!("loading {}: {e}", base.join(img).display()))
                    })
                };
                let train = load(train_images, train_labels)?;
                let test = match (test_images, test_labels) {
                    (Some(i), Some(l)) => Some(load(i, l)?),
                    _ => None,
                };
                Ok(Splits { train, test })
            }
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::invalid("config", e.message().to_string() + &span_hint(text, e.span())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize to TOML")
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks every section and returns the resolved network.
    pub fn validate(&self) -> Result<NetworkConfig, CliError> {
        self.strategy.validate().map_err(|e| prefix(e, "strategy"))?;
        self.optimizer.validate().map_err(|e| prefix(e, "optimizer"))?;
        self.schedule.validate().map_err(|e| prefix(e, "schedule"))?;
        self.dataset.validate()?;
        self.architecture.resolve()
    }

    /// SHA-256 of the canonical JSON form, hashed as a git blob would be.
    /// The output directory is not part of the experiment and is left out.
    pub fn content_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let body = serde_json::to_vec(&canonical).expect("run configs serialize to JSON");
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()));
        h.update(&body);
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    let Some(span) = span else { return String::new() };
    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
    format!(" (line {line})")
}
