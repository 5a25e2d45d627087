//! Report files written for every run.

use std::fs;
use std::path::Path;

use fbp_core::trainer::{RunReport, TrainedModel};
use serde::{Deserialize, Serialize};

use crate::{CliError, RunConfig};

pub const REPORT_FILE: &str = "report.json";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const COSINE_FILE: &str = "cosine.csv";
pub const MODEL_FILE: &str = "model.json";

pub const EPOCHS_HEADER: [&str; 7] = [
    "epoch",
    "train_loss",
    "train_acc",
    "val_acc",
    "lr",
    "values_moved_cum",
    "signs_moved_cum",
];
pub const COSINE_HEADER: [&str; 3] = ["iteration", "layer", "cosine"];

/// Contents of `report.json`: the run's report plus the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub config: RunConfig,
    pub config_hash: String,
    pub report: RunReport,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub fn write_run(dir: &Path, cfg: &RunConfig, model: &TrainedModel, report: &RunReport) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let file = ReportFile {
        config: cfg.clone(),
        config_hash: cfg.content_hash(),
        report: report.clone(),
    };
    write_json(&dir.join(REPORT_FILE), &file)?;
    write_json(&dir.join(MODEL_FILE), model)?;
    write_epochs(&dir.join(EPOCHS_FILE), report)?;
    write_cosine(&dir.join(COSINE_FILE), report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn write_epochs(path: &Path, report: &RunReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(EPOCHS_HEADER).map_err(|e| io_err(path, e))?;
    for e in &report.epochs {
        w.write_record([
            e.epoch.to_string(),
            e.train_loss.to_string(),
            e.train_acc.to_string(),
            e.val_acc.to_string(),
            e.lr.to_string(),
            e.values_moved_cum.to_string(),
            e.signs_moved_cum.to_string(),
        ])
        .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// One row per (sample, layer); a blank cosine marks a zero update vector.
fn write_cosine(path: &Path, report: &RunReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(COSINE_HEADER).map_err(|e| io_err(path, e))?;
    for rec in &report.cosine {
        for (layer, c) in rec.applied.iter().enumerate() {
            let c = c.map(|c| c.to_string()).unwrap_or_default();
            w.write_record([rec.iteration.to_string(), layer.to_string(), c])
                .map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_report(path: &Path) -> Result<ReportFile, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

pub fn read_model(path: &Path) -> Result<TrainedModel, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}
