//! `rlcmd` — run distributed mirror descent experiments, plot traces, and
//! verify the solver's invariants.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use rlcmd_harness::plot::{emit_plot, PlotColumn, PlotStyle};
use rlcmd_harness::verify::{verify_config, VerifyOptions};
use rlcmd_harness::{load_config, run_experiment, trace_io};

/// Output directory override, taking precedence over the config file
/// (the `--out` flag takes precedence over both).
const OUT_DIR_ENV: &str = "RLCMD_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "rlcmd",
    about = "Distributed mirror descent over graphs via damped primal-dual dynamics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid described by a JSON config.
    Run {
        /// Path to the experiment config (JSON; `{}` selects the defaults).
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list (repeatable).
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        /// Output directory (overrides config and RLCMD_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render trace CSVs into a log-scale SVG plot.
    Plot {
        /// Glob over trace files, e.g. "out/*_seed0.csv".
        #[arg(long)]
        traces: String,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Which gap column to plot.
        #[arg(long, value_enum, default_value_t = Column::Avg)]
        column: Column,
        /// Suppress the convergence-bound overlays.
        #[arg(long)]
        no_bounds: bool,
    },
    /// Run the invariant battery against a config and print the report.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    Avg,
    Inst,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn try_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, seeds, out } => {
            let mut cfg = load_config(&config)?;
            if !seeds.is_empty() {
                cfg.seeds = seeds;
            }
            if let Some(dir) = out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)) {
                cfg.output_dir = dir;
            }
            let summary = run_experiment(&cfg)?;
            for r in &summary.runs {
                let gap = r
                    .final_gap_avg
                    .map(|g| format!("{g:.6e}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{}/seed{}: {}  gap(avg)={}  grads={}  exchanges={}",
                    r.algorithm,
                    r.seed,
                    r.status,
                    gap,
                    r.gradient_evaluations,
                    r.neighbor_exchanges
                );
                if let Some(err) = &r.error {
                    println!("  error: {err}");
                }
            }
            if let Some(nf) = &summary.noise_floor {
                println!(
                    "noise floor: plateau {:.6e} vs envelope {:.6e} over {} seeds ({})",
                    nf.plateau_mean,
                    nf.envelope,
                    nf.num_seeds,
                    if nf.passes { "pass" } else { "FAIL" }
                );
            }
            println!(
                "summary: {}  (all checks {})",
                cfg.output_dir.join("summary.json").display(),
                if summary.all_checks_passed {
                    "passed"
                } else {
                    "FAILED"
                }
            );
            Ok(if summary.all_checks_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Plot {
            traces,
            out,
            column,
            no_bounds,
        } => {
            let mut inputs = Vec::new();
            let mut paths: Vec<PathBuf> = glob::glob(&traces)
                .context("invalid glob pattern")?
                .filter_map(|p| p.ok())
                .collect();
            paths.sort();
            for path in paths {
                let label = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                let records = trace_io::read_csv(&path)?;
                inputs.push((label, records));
            }
            if inputs.is_empty() {
                bail!("no trace files match {traces:?}");
            }
            let style = PlotStyle {
                column: match column {
                    Column::Avg => PlotColumn::GapAvg,
                    Column::Inst => PlotColumn::GapInst,
                },
                with_bounds: !no_bounds,
                ..Default::default()
            };
            let svg = emit_plot(&inputs, &style)?;
            std::fs::write(&out, svg)
                .with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { config } => {
            let cfg = load_config(&config)?;
            let report = verify_config(&cfg, &VerifyOptions::default())?;
            print!("{}", report.render_table());
            Ok(if report.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
