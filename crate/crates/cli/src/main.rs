use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use hyperbandit::harness::{
    self, write_outputs, write_svd, ErrorKind, ExperimentConfig, HarnessError, Seeds,
};
use hyperbandit::hypernet::{load_checkpoint, HypernetError};

/// Time-period-aware contextual bandit experiments.
#[derive(Parser)]
#[command(name = "hyperbandit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write trace.csv, buffers.csv, summary.json and timings.json.
    Run {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-buffer progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Write the singular values of every period's preference matrix as CSV.
    SvdReport {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat an experiment with seeds 0..k and report mean ± std.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seeds: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the default configuration as JSON.
    DefaultConfig,
}

fn out_dir(cli: Option<PathBuf>, cfg: &ExperimentConfig) -> Result<PathBuf> {
    cli.or_else(|| cfg.output_dir.clone()).ok_or_else(|| {
        HarnessError::Config("no output directory: pass --out or set output_dir".into()).into()
    })
}

fn run_one(cfg: &ExperimentConfig, out: &Path, quiet: bool) -> Result<harness::Summary> {
    let mut progress = |row: &harness::BufferRow| {
        if !quiet {
            eprintln!(
                "buffer {:>3} steps {:>6}..={:<6} epochs {:>3} val loss {:.4}",
                row.n, row.start_step, row.end_step, row.epochs, row.validation_loss
            );
        }
    };
    let outcome = harness::run_with_progress(cfg, &mut progress)?;
    write_outputs(out, &outcome)?;
    Ok(outcome.summary)
}

/// Prints a line to stdout; a closed pipe (e.g. `| head`) is not an error.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, quiet } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = out_dir(out, &cfg)?;
            let s = run_one(&cfg, &dir, quiet)?;
            say(&serde_json::to_string_pretty(&s)?);
        }
        Command::SvdReport { checkpoint, out } => {
            let net = load_checkpoint(&checkpoint).map_err(|e| match e {
                HypernetError::Io(source) => HarnessError::Io {
                    path: checkpoint.clone(),
                    source,
                },
                other => HarnessError::from(other),
            })?;
            write_svd(&out, &harness::svd_report(&net))?;
        }
        Command::Sweep { config, seeds, out, quiet } => {
            let base = ExperimentConfig::load(&config)?;
            let dir = out_dir(out, &base)?;
            if seeds == 0 {
                return Err(HarnessError::Config("--seeds must be at least 1".into()).into());
            }
            let mut normalized = Vec::new();
            let mut regrets = Vec::new();
            for k in 0..seeds {
                let cfg = ExperimentConfig {
                    seeds: Seeds::from_master(k),
                    ..base.clone()
                };
                let s = run_one(&cfg, &dir.join(format!("seed_{k}")), quiet)
                    .with_context(|| format!("seed {k}"))?;
                if !quiet {
                    eprintln!("seed {k}: normalized reward {:?}", s.normalized_accumulated_reward);
                }
                normalized.extend(s.normalized_accumulated_reward);
                regrets.extend(s.final_cumulative_regret);
            }
            let stat = |v: &[f64]| {
                (!v.is_empty()).then(|| {
                    let (mean, std) = mean_std(v);
                    serde_json::json!({ "mean": mean, "std": std, "values": v })
                })
            };
            let report = serde_json::json!({
                "seeds": seeds,
                "normalized_accumulated_reward": stat(&normalized),
                "final_cumulative_regret": stat(&regrets),
            });
            let path = dir.join("sweep.json");
            std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n").map_err(|source| {
                HarnessError::Io {
                    path: path.clone(),
                    source,
                }
            })?;
            if !normalized.is_empty() {
                let (m, s) = mean_std(&normalized);
                say(&format!("normalized accumulated reward: {m:.4} ± {s:.4}"));
            }
            if !regrets.is_empty() {
                let (m, s) = mean_std(&regrets);
                say(&format!("final cumulative regret: {m:.2} ± {s:.2}"));
            }
        }
        Command::DefaultConfig => {
            say(&serde_json::to_string_pretty(&ExperimentConfig::default())?);
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<HarnessError>().map(HarnessError::kind) {
        Some(ErrorKind::Config) => 1,
        Some(ErrorKind::Io) => 2,
        Some(ErrorKind::Numerical) => 3,
        // serde_json failures while printing are output problems.
        None => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
