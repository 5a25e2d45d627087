//! Experiment runner: single runs, strategy sweeps, gradient checks and evaluation.

pub mod config;
pub mod output;
pub mod sweep;

use std::path::{Path, PathBuf};

use fbp_core::data::{encode_dataset, Dataset};
use fbp_core::gradcheck::{gradcheck, GradcheckConfig};
use fbp_core::init::init_weights;
use fbp_core::trainer::{evaluate, rng_stream, train, RunReport, RunStatus, Stream, TrainedModel};
use fbp_core::{Network, NetworkConfig};
use ndarray::Array2;
use rand::Rng;
use serde::Serialize;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid { .. } => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

/// Largest network `gradcheck` accepts.
pub const GRADCHECK_MAX_WEIGHTS: usize = 10_000;

/// A config file together with the command-line overrides.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Invocation {
    pub fn load(&self) -> Result<(RunConfig, NetworkConfig), CliError> {
        let mut cfg = RunConfig::read(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        // --out is relative to the working directory, `out_dir` to the config file.
        match &self.out {
            Some(out) => cfg.out_dir = Some(out.clone()),
            None => cfg.out_dir = cfg.out_dir.map(|d| self.base_dir().join(d)),
        }
        let net = cfg.validate()?;
        Ok((cfg, net))
    }

    /// Directory that relative dataset paths are resolved against.
    pub fn base_dir(&self) -> PathBuf {
        self.config.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

pub fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    cfg.out_dir
        .clone()
        .ok_or_else(|| CliError::invalid("out_dir", "no output directory (set `out_dir` or pass --out)"))
}

/// Trains one configuration and writes its report files to `dir`.
///
/// A diverged run still writes its files; the caller decides how to treat it.
pub fn run_and_write(
    cfg: &RunConfig,
    net: &NetworkConfig,
    base: &Path,
    dir: &Path,
) -> Result<(TrainedModel, RunReport), CliError> {
    let data = cfg.dataset.load(base)?;
    let (model, report) = train(
        net,
        cfg.strategy,
        &cfg.optimizer,
        &cfg.schedule,
        &cfg.metrics,
        cfg.seed,
        &data.train,
        data.test.as_ref(),
    )
    .map_err(|e| match e {
        fbp_core::Error::Config { .. } => config::prefix(e, "config"),
        fbp_core::Error::Shape(reason) => CliError::invalid("dataset", reason),
        other => CliError::Runtime(other.to_string()),
    })?;
    output::write_run(dir, cfg, &model, &report)?;
    Ok((model, report))
}

pub fn cmd_train(inv: &Invocation) -> Result<RunReport, CliError> {
    let (cfg, net) = inv.load()?;
    let dir = out_dir(&cfg)?;
    let (_, report) = run_and_write(&cfg, &net, &inv.base_dir(), &dir)?;
    if let RunStatus::Diverged { iteration, reason } = &report.status {
        return Err(CliError::Runtime(format!(
            "training diverged at iteration {iteration}: {reason} (partial report in {})",
            dir.display()
        )));
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub samples: usize,
    pub accuracy: f64,
    pub loss: f64,
}

/// Scores a saved model on the configured test split.
pub fn cmd_eval(inv: &Invocation, model: Option<&Path>) -> Result<EvalSummary, CliError> {
    let (cfg, net_cfg) = inv.load()?;
    let path = match model {
        Some(p) => p.to_path_buf(),
        None => out_dir(&cfg)?.join(output::MODEL_FILE),
    };
    let model = output::read_model(&path)?;
    if model.network != net_cfg {
        return Err(CliError::invalid(
            "architecture",
            format!("{} was trained with a different architecture", path.display()),
        ));
    }
    let data = cfg.dataset.load(&inv.base_dir())?;
    let test = data
        .test
        .ok_or_else(|| CliError::invalid("dataset", "eval needs a test split"))?;
    let net = Network::new(&net_cfg).map_err(|e| config::prefix(e, "architecture"))?;
    let encoded = encode_dataset(&test, net.time_window());
    let (accuracy, loss) =
        evaluate(&net, &model.weights, &encoded).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(EvalSummary {
        samples: test.len(),
        accuracy,
        loss,
    })
}

#[derive(Debug, Clone)]
pub struct GradcheckArgs {
    pub cases: usize,
    pub batch: usize,
    pub check: GradcheckConfig,
    pub zero_weights: bool,
}

impl Default for GradcheckArgs {
    fn default() -> Self {
        GradcheckArgs {
            cases: 10,
            batch: 4,
            check: GradcheckConfig::default(),
            zero_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckSummary {
    pub cases: usize,
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
    pub passed: bool,
}

/// Finite-difference check on random weights and inputs for the configured architecture.
pub fn cmd_gradcheck(inv: &Invocation, args: &GradcheckArgs) -> Result<GradcheckSummary, CliError> {
    let (cfg, net_cfg) = inv.load()?;
    if args.cases == 0 || args.batch == 0 {
        return Err(CliError::invalid("cases", "need at least one case and one sample"));
    }
    let net = Network::new(&net_cfg).map_err(|e| config::prefix(e, "architecture"))?;
    if net.weight_count() > GRADCHECK_MAX_WEIGHTS {
        return Err(CliError::invalid(
            "architecture",
            format!(
                "gradcheck is limited to {GRADCHECK_MAX_WEIGHTS} weights, this network has {}",
                net.weight_count()
            ),
        ));
    }
    let mut rng = rng_stream(cfg.seed, Stream::Init);
    let mut summary = GradcheckSummary {
        cases: args.cases,
        tolerance: args.check.tolerance,
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        passed: true,
    };
    for _ in 0..args.cases {
        let mut weights = init_weights(&net, &mut rng);
        if args.zero_weights {
            weights.iter_mut().for_each(|w| w.fill(0.0));
        }
        let features = Array2::from_shape_simple_fn((args.batch, net.input_size()), || rng.random::<f64>());
        let labels: Vec<usize> = (0..args.batch).map(|_| rng.random_range(0..net.num_classes())).collect();
        let data = Dataset::new(features, labels, net_cfg.input_shape, net.num_classes())
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let encoded = encode_dataset(&data, net.time_window());
        let r = gradcheck(&net, &weights, encoded.times.view(), &encoded.labels, &args.check)
            .map_err(|e| config::prefix(e, "gradcheck"))?;
        summary.max_rel_error = summary.max_rel_error.max(r.max_rel_error);
        summary.checked += r.checked;
        summary.skipped += r.skipped;
        summary.passed &= r.passed;
    }
    Ok(summary)
}
