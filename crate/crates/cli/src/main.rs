use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbp_cli::sweep::{cmd_sweep, SweepGrid};
use fbp_cli::{cmd_eval, cmd_gradcheck, cmd_train, CliError, GradcheckArgs, Invocation};

#[derive(Parser)]
#[command(name = "fbp", version, about = "Train time-to-first-spike networks with frozen weight transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration.
    Train(Common),
    /// Run a BP baseline and a grid of strategies, then write tradeoff.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Grid file listing `[[members]]` and/or `[[axis]]` entries.
        #[arg(long)]
        grid: PathBuf,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        cases: usize,
        #[arg(long, default_value_t = 4)]
        batch: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 1e-6)]
        step: f64,
        /// Check an all-zero network instead of random weights.
        #[arg(long)]
        zero_weights: bool,
    },
    /// Score a saved model on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

impl Common {
    fn invocation(&self) -> Result<Invocation, CliError> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::invalid("threads", "must be at least 1"));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        Ok(Invocation {
            config: self.config.clone(),
            out: self.out.clone(),
            seed: self.seed,
        })
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("summaries serialize"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => {
            let report = cmd_train(&common.invocation()?)?;
            let acc = report.test_accuracy.map_or("n/a".into(), |a| format!("{:.4}", a));
            eprintln!(
                "{} epochs, best val acc {:.4}, test acc {acc}",
                report.epochs_used, report.best_val_acc
            );
        }
        Command::Sweep { common, grid } => {
            let inv = common.invocation()?;
            let rows = cmd_sweep(&inv, &SweepGrid::read(&grid)?)?;
            let failed = rows.iter().filter(|r| r.status == "failed").count();
            eprintln!("{} members, {failed} failed", rows.len());
        }
        Command::Gradcheck {
            common,
            cases,
            batch,
            tolerance,
            step,
            zero_weights,
        } => {
            let mut args = GradcheckArgs {
                cases,
                batch,
                zero_weights,
                ..Default::default()
            };
            args.check.tolerance = tolerance;
            args.check.step = step;
            let summary = cmd_gradcheck(&common.invocation()?, &args)?;
            print_json(&summary);
            if !summary.passed {
                return Err(CliError::Runtime(format!(
                    "gradient check failed: max relative error {:e} > tolerance {:e}",
                    summary.max_rel_error, summary.tolerance
                )));
            }
        }
        Command::Eval { common, model } => {
            print_json(&cmd_eval(&common.invocation()?, model.as_deref())?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are validation errors, not clap's default exit status 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
