//! `ecprune` command-line runner.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use ecprune::checkpoint::Checkpoint;
use ecprune::harness::{run_experiment_with, write_report, ExperimentSpec, ReportFormat, RunOptions};

#[derive(Parser)]
#[command(name = "ecprune", version, about = "Train, prune and fine-tune fully-connected networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, seed, ratio) cell of an experiment spec.
    Run {
        /// TOML experiment spec.
        #[arg(long)]
        spec: PathBuf,
        /// Report destination.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Worker threads. Results do not depend on this.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Override the number of training samples used for expectations.
        #[arg(long)]
        subset: Option<usize>,
    },
    /// Parse a spec and print it with defaults filled in.
    Check {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Summarize a checkpoint file.
    Inspect { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run {
            spec,
            out,
            format,
            jobs,
            subset,
        } => {
            let mut exp = ExperimentSpec::from_file(&spec).with_context(|| format!("loading {}", spec.display()))?;
            if subset.is_some() {
                exp.expectation_subset = subset;
            }
            let report = run_experiment_with(&exp, RunOptions { jobs })?;
            let format = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            write_report(&report, &out, format).with_context(|| format!("writing {}", out.display()))?;
            for row in report.failures() {
                eprintln!(
                    "failed: strategy={} seed={} ratio={}: {}",
                    row.strategy,
                    row.seed,
                    row.ratio,
                    row.error.as_deref().unwrap_or_default()
                );
            }
            eprintln!("{} rows written to {}", report.rows.len(), out.display());
            Ok(report.all_succeeded())
        }
        Command::Check { spec } => {
            let exp = ExperimentSpec::from_file(&spec)?;
            print!("{}", exp.to_toml_string()?);
            Ok(true)
        }
        Command::Inspect { path } => {
            let ck = Checkpoint::load(&path)?;
            if let Some(net) = &ck.network {
                let arch: Vec<String> = net.architecture().iter().map(usize::to_string).collect();
                println!("network       {} ({} weights)", arch.join("-"), net.weight_count());
                for (l, layer) in net.layers().iter().enumerate() {
                    println!("  layer {l}     {}x{} {}", layer.out_dim(), layer.in_dim(), layer.activation().name());
                }
            }
            if let Some(mask) = &ck.mask {
                println!("mask          {} of {} kept", mask.nonzero_count(), mask.total());
            }
            if let Some(s) = &ck.scores {
                println!("scores        {} entries", s.total());
            }
            if let Some(c) = &ck.compensation {
                println!("compensation  {} entries", c.total());
            }
            if let Some(o) = &ck.optimizer {
                println!("optimizer     step {}", o.step);
            }
            Ok(true)
        }
    }
}
