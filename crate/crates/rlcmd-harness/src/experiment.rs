//! Experiment orchestration: per (algorithm, seed) runs with shared
//! instances and cached references, per-run invariant checks, trace CSVs,
//! and the summary JSON.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use rlcmd_core::metrics::{self, IterationTrace, NoiseFloorEstimate};
use rlcmd_core::problem::{
    generate_instance, solve_reference, ProblemInstance, ReferenceSolution,
    REFERENCE_DEFAULT_TOL, REFERENCE_KKT_GATE,
};
use rlcmd_core::solvers::{run, Algorithm, NoiseModel, RunStatus};

use crate::config::ExperimentConfig;
use crate::trace_io;
use crate::verify::CheckStatus;
use crate::HarnessError;

/// Iteration budget for the reference solve's iterative stage.
const REFERENCE_MAX_ITERS: usize = 200_000;

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceInfo {
    pub seed: u64,
    pub instance_hash: String,
    pub kkt_residual: f64,
    pub optimal_value: f64,
    pub from_cache: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
    pub iterations_recorded: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_gap_avg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_gap_inst: Option<f64>,
    pub initial_energy: Option<f64>,
    pub gradient_evaluations: u64,
    pub neighbor_exchanges: u64,
    pub edge_messages: u64,
    pub checks: BTreeMap<&'static str, CheckStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_file: Option<String>,
}

impl RunSummary {
    fn checks_pass(&self) -> bool {
        self.error.is_none()
            && self
                .checks
                .values()
                .all(|c| !matches!(c, CheckStatus::Fail(_)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub references: Vec<ReferenceInfo>,
    pub runs: Vec<RunSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_floor: Option<NoiseFloorEstimate>,
    pub all_checks_passed: bool,
}

/// Solves the reference for `instance`, consulting the on-disk cache keyed
/// by `(instance hash, tol)` next to the other outputs.
pub fn reference_with_cache(
    dir: &Path,
    instance: &ProblemInstance,
    tol: f64,
) -> Result<(ReferenceSolution, String, bool), HarnessError> {
    let hash = instance.content_hash()?;
    let path = dir.join(format!("reference_{hash}_tol{tol:e}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(cached) = serde_json::from_str::<ReferenceSolution>(&text) {
            if cached.tol() == tol && cached.kkt_residual() <= REFERENCE_KKT_GATE {
                return Ok((cached, hash, true));
            }
        }
    }
    let reference = solve_reference(instance, tol, REFERENCE_MAX_ITERS)?;
    std::fs::write(&path, serde_json::to_string(&reference)?)
        .map_err(|e| HarnessError::Io(format!("writing {}: {e}", path.display())))?;
    Ok((reference, hash, false))
}

fn run_one(
    config: &ExperimentConfig,
    instance: &ProblemInstance,
    reference: &ReferenceSolution,
    algorithm: Algorithm,
    seed: u64,
    out_dir: &Path,
) -> (RunSummary, Option<IterationTrace>) {
    let mut summary = RunSummary {
        algorithm,
        seed,
        status: "error".into(),
        error: None,
        diverged_at: None,
        iterations_recorded: 0,
        final_gap_avg: None,
        final_gap_inst: None,
        initial_energy: None,
        gradient_evaluations: 0,
        neighbor_exchanges: 0,
        edge_messages: 0,
        checks: BTreeMap::new(),
        trace_file: None,
    };

    let noisy = config.sigma > 0.0;
    let schedule = match config
        .schedule_for(algorithm)
        .resolve(algorithm, instance, noisy, config.iters)
    {
        Ok(s) => s,
        Err(e) => {
            summary.error = Some(e.to_string());
            return (summary, None);
        }
    };
    let noise = NoiseModel {
        sigma: config.sigma,
        seed,
    };
    let output = match run(instance, reference, algorithm, &schedule, &noise, config.iters) {
        Ok(o) => o,
        Err(e) => {
            summary.error = Some(e.to_string());
            return (summary, None);
        }
    };

    let trace_name = format!("{algorithm}_seed{seed}.csv");
    if let Err(e) = trace_io::write_csv(&out_dir.join(&trace_name), &output.trace.records) {
        summary.error = Some(e.to_string());
        return (summary, None);
    }

    let records = &output.trace.records;
    let counters = output.final_state.counters();
    summary.status = match &output.status {
        RunStatus::Completed => "completed".into(),
        RunStatus::Diverged { at_iteration, .. } => {
            summary.diverged_at = Some(*at_iteration);
            "diverged".into()
        }
    };
    summary.iterations_recorded = records.len();
    summary.final_gap_avg = records.last().map(|r| r.gap_avg);
    summary.final_gap_inst = records.last().map(|r| r.gap_inst);
    summary.initial_energy = Some(output.trace.meta.initial_energy);
    summary.gradient_evaluations = counters.gradient_evaluations;
    summary.neighbor_exchanges = counters.neighbor_exchanges;
    summary.edge_messages = counters.edge_messages;
    summary.trace_file = Some(trace_name);
    summary.checks = run_checks(config, algorithm, &output.status, records, instance);
    (summary, Some(output.trace))
}

/// Per-run invariant checks over the recorded trace.
fn run_checks(
    config: &ExperimentConfig,
    algorithm: Algorithm,
    status: &RunStatus,
    records: &[metrics::IterationRecord],
    instance: &ProblemInstance,
) -> BTreeMap<&'static str, CheckStatus> {
    let mut checks = BTreeMap::new();
    let damped = matches!(algorithm, Algorithm::Rlc | Algorithm::CoRlc);
    let noiseless = config.sigma == 0.0;
    let completed = matches!(status, RunStatus::Completed);

    // Gap nonnegativity is enforced inside the metric layer (a violation
    // aborts the run); a finished trace certifies it.
    checks.insert("gap_nonnegative", CheckStatus::Pass);

    checks.insert(
        "dissipation",
        if !damped {
            CheckStatus::Skipped("inequality proved for the damped iteration only".into())
        } else {
            let min = records
                .iter()
                .map(|r| r.dissipation_slack)
                .fold(f64::INFINITY, f64::min);
            if min >= -metrics::DISSIPATION_SLACK_TOL {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail(format!("min slack {min:.3e}"))
            }
        },
    );

    checks.insert(
        "energy_monotone",
        if !damped || !noiseless {
            CheckStatus::Skipped("applies to noiseless damped runs".into())
        } else {
            let worst = records
                .windows(2)
                .map(|p| p[1].energy - p[0].energy)
                .fold(f64::NEG_INFINITY, f64::max);
            if worst <= 1e-10 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail(format!("worst rise {worst:.3e}"))
            }
        },
    );

    checks.insert(
        "bound_dominates",
        if !damped || !noiseless {
            CheckStatus::Skipped("averaged-gap bound applies to noiseless damped runs".into())
        } else {
            let worst = records
                .iter()
                .map(|r| r.gap_avg - r.theorem_bound)
                .fold(f64::NEG_INFINITY, f64::max);
            if worst <= 1e-9 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail(format!("gap exceeds bound by {worst:.3e}"))
            }
        },
    );

    checks.insert("counters_exact", {
        let k = records.len() as u64;
        let per_iter = match algorithm {
            Algorithm::MirrorProx => 2,
            _ => 1,
        };
        let (got_g, got_x) = records
            .last()
            .map(|r| (r.grad_evals, r.exchanges))
            .unwrap_or((0, 0));
        if got_g == per_iter * k && got_x == per_iter * k {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail(format!(
                "expected {}·{k}, recorded ({got_g}, {got_x})",
                per_iter
            ))
        }
    });

    checks.insert(
        "consensus_reduction",
        if instance.graph().num_edges() == 0 {
            CheckStatus::Skipped("no edges on a single-node instance".into())
        } else if !noiseless || !completed || !damped {
            // The undamped baselines have oscillatory last iterates; the
            // tenfold reduction follows from energy dissipation, which is
            // the damped iteration's property.
            CheckStatus::Skipped(
                "tenfold-reduction check applies to completed noiseless damped runs".into(),
            )
        } else if records.len() < 1000 {
            CheckStatus::Skipped("run too short for the tenfold-reduction property".into())
        } else {
            let peak = records
                .iter()
                .map(|r| r.consensus_residual)
                .fold(0.0_f64, f64::max);
            let last = records.last().map(|r| r.consensus_residual).unwrap_or(0.0);
            if peak < 1e-12 {
                CheckStatus::Skipped("iterates never left consensus".into())
            } else if last < peak / 10.0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail(format!("final {last:.3e} vs peak {peak:.3e}"))
            }
        },
    );

    checks
}

/// Runs the whole experiment grid. For each seed, the instance is generated
/// once and shared across algorithms; the reference is solved once and
/// cached on disk. Returns the summary; `summary.all_checks_passed` is the
/// process exit condition.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, HarnessError> {
    config.validate()?;
    let out_dir: PathBuf = config.output_dir.clone();
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| HarnessError::Io(format!("creating {}: {e}", out_dir.display())))?;

    struct SeedResult {
        reference: ReferenceInfo,
        runs: Vec<RunSummary>,
        floor_traces: Vec<IterationTrace>,
    }

    let params = config.instance_params();
    let seed_results: Vec<SeedResult> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let instance = match generate_instance(&params, seed) {
                Ok(i) => i,
                Err(e) => {
                    return SeedResult {
                        reference: ReferenceInfo {
                            seed,
                            instance_hash: String::new(),
                            kkt_residual: f64::NAN,
                            optimal_value: f64::NAN,
                            from_cache: false,
                            error: Some(format!("instance generation failed: {e}")),
                        },
                        runs: Vec::new(),
                        floor_traces: Vec::new(),
                    }
                }
            };
            let hash = instance.content_hash().unwrap_or_default();
            let instance_path = out_dir.join(format!("instance_seed{seed}.json"));
            if let Ok(json) = serde_json::to_string(&instance) {
                let _ = std::fs::write(&instance_path, json);
            }
            let (reference, hash, from_cache) =
                match reference_with_cache(&out_dir, &instance, REFERENCE_DEFAULT_TOL) {
                    Ok(r) => r,
                    Err(e) => {
                        return SeedResult {
                            reference: ReferenceInfo {
                                seed,
                                instance_hash: hash,
                                kkt_residual: f64::NAN,
                                optimal_value: f64::NAN,
                                from_cache: false,
                                error: Some(e.to_string()),
                            },
                            runs: Vec::new(),
                            floor_traces: Vec::new(),
                        }
                    }
                };

            let mut runs = Vec::new();
            let mut floor_traces = Vec::new();
            for &algorithm in &config.algorithms {
                let (summary, trace) =
                    run_one(config, &instance, &reference, algorithm, seed, &out_dir);
                if matches!(algorithm, Algorithm::Rlc | Algorithm::CoRlc) {
                    if let Some(t) = trace {
                        floor_traces.push(t);
                    }
                }
                runs.push(summary);
            }
            SeedResult {
                reference: ReferenceInfo {
                    seed,
                    instance_hash: hash,
                    kkt_residual: reference.kkt_residual(),
                    optimal_value: reference.optimal_value(),
                    from_cache,
                    error: None,
                },
                runs,
                floor_traces,
            }
        })
        .collect();

    let mut references = Vec::new();
    let mut runs = Vec::new();
    let mut floor_traces = Vec::new();
    for sr in seed_results {
        references.push(sr.reference);
        runs.extend(sr.runs);
        floor_traces.extend(sr.floor_traces);
    }

    let noise_floor = if config.sigma > 0.0
        && floor_traces.len() >= metrics::NOISE_FLOOR_MIN_SEEDS
        && floor_traces
            .iter()
            .all(|t| t.records.len() == config.iters)
    {
        metrics::noise_floor_estimate(&floor_traces).ok()
    } else {
        None
    };

    if config.emit_plots {
        write_seed_plots(config, &out_dir)?;
    }

    let all_checks_passed = references.iter().all(|r| r.error.is_none())
        && runs.iter().all(|r| r.checks_pass())
        && noise_floor.is_none_or(|nf| nf.passes);

    let summary = ExperimentSummary {
        config: config.clone(),
        references,
        runs,
        noise_floor,
        all_checks_passed,
    };
    let summary_path = out_dir.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .map_err(|e| HarnessError::Io(format!("writing {}: {e}", summary_path.display())))?;
    Ok(summary)
}

fn write_seed_plots(config: &ExperimentConfig, out_dir: &Path) -> Result<(), HarnessError> {
    for &seed in &config.seeds {
        let mut traces = Vec::new();
        for &algorithm in &config.algorithms {
            let path = out_dir.join(format!("{algorithm}_seed{seed}.csv"));
            if path.exists() {
                traces.push((algorithm.to_string(), trace_io::read_csv(&path)?));
            }
        }
        if traces.is_empty() {
            continue;
        }
        let svg = crate::plot::emit_plot(&traces, &crate::plot::PlotStyle::default())?;
        let plot_path = out_dir.join(format!("plot_seed{seed}.svg"));
        std::fs::write(&plot_path, svg)
            .map_err(|e| HarnessError::Io(format!("writing {}: {e}", plot_path.display())))?;
    }
    Ok(())
}
