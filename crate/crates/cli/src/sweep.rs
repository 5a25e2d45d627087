//! Strategy sweeps against a per-iteration BP baseline.

use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use fbp_core::metrics::tradeoff_curve;
use fbp_core::trainer::{RunReport, RunStatus};
use fbp_core::TransportStrategy;
use serde::{Deserialize, Serialize};

use crate::{out_dir, run_and_write, CliError, Invocation};

pub const TRADEOFF_FILE: &str = "tradeoff.csv";
pub const TRADEOFF_HEADER: [&str; 6] = [
    "strategy",
    "params",
    "reduction_factor",
    "accuracy_drop_pp",
    "epochs_used",
    "status",
];

/// Grid file: explicit `[[members]]` strategies and/or `[[axis]]` sweeps over one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub members: Vec<TransportStrategy>,
    #[serde(default)]
    pub axis: Vec<Axis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    /// Strategy table with every field except the swept one.
    pub strategy: toml::Table,
    pub param: String,
    pub values: Vec<toml::Value>,
}

impl SweepGrid {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::invalid("grid", format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::invalid("grid", e.message()))
    }

    /// Every member strategy, validated, without duplicates, in grid order.
    pub fn expand(&self) -> Result<Vec<TransportStrategy>, CliError> {
        let mut out = self.members.clone();
        for (a, axis) in self.axis.iter().enumerate() {
            for v in &axis.values {
                let mut table = axis.strategy.clone();
                table.insert(axis.param.clone(), v.clone());
                let s: TransportStrategy = toml::Value::Table(table)
                    .try_into()
                    .map_err(|e: toml::de::Error| CliError::invalid(format!("grid.axis[{a}]"), e.message()))?;
                out.push(s);
            }
        }
        for (i, s) in out.iter().enumerate() {
            s.validate()
                .map_err(|e| CliError::invalid(format!("grid member {i} ({})", s.name()), e.to_string()))?;
        }
        let mut unique: Vec<TransportStrategy> = Vec::new();
        for s in out {
            if !unique.contains(&s) {
                unique.push(s);
            }
        }
        if unique.is_empty() {
            return Err(CliError::invalid("grid", "the grid has no members"));
        }
        Ok(unique)
    }
}

/// `phi=10;k=1`, or empty for parameter-free strategies.
pub fn params_label(s: &TransportStrategy) -> String {
    s.params()
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn member_dir(s: &TransportStrategy) -> String {
    std::iter::once(s.name().to_string())
        .chain(s.params().iter().map(|(k, v)| format!("{k}{v}")))
        .collect::<Vec<_>>()
        .join("-")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffRow {
    pub strategy: TransportStrategy,
    pub reduction_factor: Option<f64>,
    pub accuracy_drop_pp: Option<f64>,
    pub epochs_used: Option<usize>,
    pub status: String,
}

fn order(a: &TransportStrategy, b: &TransportStrategy) -> Ordering {
    a.name().cmp(b.name()).then_with(|| {
        let (pa, pb) = (a.params(), b.params());
        pa.iter()
            .zip(&pb)
            .map(|((_, x), (_, y))| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn status_label(s: &RunStatus) -> &'static str {
    match s {
        RunStatus::Completed => "completed",
        RunStatus::EarlyStopped => "early_stopped",
        RunStatus::Diverged { .. } => "diverged",
    }
}

/// Runs the BP baseline, then every member capped at the baseline's epoch count.
pub fn cmd_sweep(inv: &Invocation, grid: &SweepGrid) -> Result<Vec<TradeoffRow>, CliError> {
    let members = grid.expand()?;
    let (base_cfg, net) = inv.load()?;
    if !base_cfg.dataset.has_test() {
        return Err(CliError::invalid("dataset", "a sweep needs a test split to compare accuracies"));
    }
    let root = out_dir(&base_cfg)?;
    let base_dir = inv.base_dir();

    let mut bp_cfg = base_cfg.clone();
    bp_cfg.strategy = TransportStrategy::FullEveryIteration;
    let (_, baseline) = run_and_write(&bp_cfg, &net, &base_dir, &root.join(member_dir(&bp_cfg.strategy)))?;
    if let RunStatus::Diverged { iteration, reason } = &baseline.status {
        return Err(CliError::Runtime(format!(
            "baseline diverged at iteration {iteration}: {reason}"
        )));
    }

    let mut rows = Vec::new();
    for strategy in members {
        let report: Result<RunReport, CliError> = if strategy == TransportStrategy::FullEveryIteration {
            Ok(baseline.clone())
        } else {
            let mut cfg = base_cfg.clone();
            cfg.strategy = strategy;
            cfg.schedule.max_epochs = cfg.schedule.max_epochs.min(baseline.epochs_used);
            run_and_write(&cfg, &net, &base_dir, &root.join(member_dir(&strategy))).map(|(_, r)| r)
        };
        let row = match report.and_then(|r| {
            let point = tradeoff_curve(std::slice::from_ref(&r), &baseline)
                .map_err(|e| CliError::Runtime(e.to_string()))?[0];
            Ok((r, point))
        }) {
            Ok((r, point)) => TradeoffRow {
                strategy,
                reduction_factor: Some(point.reduction_factor),
                accuracy_drop_pp: Some(point.accuracy_drop_pp),
                epochs_used: Some(r.epochs_used),
                status: status_label(&r.status).into(),
            },
            Err(e) => {
                eprintln!("sweep member {} failed: {e}", member_dir(&strategy));
                TradeoffRow {
                    strategy,
                    reduction_factor: None,
                    accuracy_drop_pp: None,
                    epochs_used: None,
                    status: "failed".into(),
                }
            }
        };
        rows.push(row);
    }
    rows.sort_by(|a, b| order(&a.strategy, &b.strategy));
    write_tradeoff(&root.join(TRADEOFF_FILE), &rows)?;
    Ok(rows)
}

pub fn write_tradeoff(path: &PathBuf, rows: &[TradeoffRow]) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(TRADEOFF_HEADER).map_err(err)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in rows {
        w.write_record([
            r.strategy.name().to_string(),
            params_label(&r.strategy),
            opt(r.reduction_factor.map(|v| v.to_string())),
            opt(r.accuracy_drop_pp.map(|v| v.to_string())),
            opt(r.epochs_used.map(|v| v.to_string())),
            r.status.clone(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}
