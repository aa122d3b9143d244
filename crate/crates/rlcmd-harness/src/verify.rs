//! The `verify` command: runs the full property battery at desk scale
//! against a configuration and reports a per-check table.
//!
//! Checks that are vacuous for a configuration (e.g. edge identities on a
//! single-node graph) report `skipped`, not `pass`.

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use rlcmd_core::graph::PSD_TOL;
use rlcmd_core::metrics::{self};
use rlcmd_core::mirror::MirrorMap;
use rlcmd_core::problem::{
    generate_instance, seeded_stream, solve_reference, ProblemInstance, ReferenceSolution,
    REFERENCE_DEFAULT_TOL, REFERENCE_KKT_GATE,
};
use rlcmd_core::solvers::{
    rlc_step, run, Algorithm, AverageMode, NoiseModel, SolverState,
};

use crate::config::ExperimentConfig;
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum CheckStatus {
    Pass,
    Fail(String),
    Skipped(String),
}

impl CheckStatus {
    pub fn failed(&self) -> bool {
        matches!(self, CheckStatus::Fail(_))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(flatten)]
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

impl VerifyReport {
    pub fn render_table(&self) -> String {
        let width = self
            .checks
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = String::new();
        out.push_str(&format!("{:width$}  RESULT\n", "CHECK"));
        for c in &self.checks {
            let (verdict, detail) = match &c.status {
                CheckStatus::Pass => ("pass", String::new()),
                CheckStatus::Fail(d) => ("FAIL", format!("  ({d})")),
                CheckStatus::Skipped(d) => ("skipped", format!("  ({d})")),
            };
            out.push_str(&format!("{:width$}  {verdict}{detail}\n", c.name));
        }
        out.push_str(&format!(
            "overall: {}\n",
            if self.all_passed { "pass" } else { "FAIL" }
        ));
        out
    }
}

/// Internal knobs for the battery. `alpha_override` deliberately replaces
/// the damped iteration's step size in the dissipation check (a negative
/// test hook: an oversized step must make the check fail and be reported);
/// it is not reachable from the CLI.
#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub alpha_override: Option<f64>,
}

struct Battery {
    checks: Vec<CheckResult>,
}

impl Battery {
    fn record(&mut self, name: &str, status: CheckStatus) {
        self.checks.push(CheckResult {
            name: name.to_string(),
            status,
        });
    }
}

/// Runs the battery against the configuration's first-seed instance.
pub fn verify_config(
    config: &ExperimentConfig,
    options: &VerifyOptions,
) -> Result<VerifyReport, HarnessError> {
    config.validate()?;
    let seed = config.seeds[0];
    let instance = generate_instance(&config.instance_params(), seed)?;
    let mut battery = Battery { checks: Vec::new() };

    check_incidence(&mut battery, &instance);
    check_three_point(&mut battery, seed);
    check_psd_damping(&mut battery, &instance);
    check_mirror_optimality(&mut battery, seed);
    check_oracle_equivalence(&mut battery, seed);
    check_strong_convexity(&mut battery, seed);
    check_mixing_matrix(&mut battery, &instance);

    match solve_reference(&instance, REFERENCE_DEFAULT_TOL, 200_000) {
        Ok(reference) => {
            check_reference_gate(&mut battery, &instance, &reference);
            check_runs(&mut battery, config, &instance, &reference, options);
        }
        Err(e) => {
            battery.record("reference_gate", CheckStatus::Fail(e.to_string()));
        }
    }

    let all_passed = !battery.checks.iter().any(|c| c.status.failed());
    Ok(VerifyReport {
        checks: battery.checks,
        all_passed,
    })
}

fn check_incidence(battery: &mut Battery, instance: &ProblemInstance) {
    let graph = instance.graph();
    if graph.num_edges() == 0 {
        battery.record(
            "incidence_nullspace",
            CheckStatus::Skipped("no edges on a single-node graph".into()),
        );
        return;
    }
    let e = graph.incidence_matrix();
    let ones = DVector::from_element(graph.num_nodes(), 1.0);
    let exact = (e.transpose() * ones).iter().all(|&v| v == 0.0);
    battery.record(
        "incidence_nullspace",
        if exact {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail("Eᵀ𝟙 ≠ 0".into())
        },
    );
}

fn random_simplex(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    let raw: Vec<f64> = (0..n)
        .map(|_| -(rng.gen::<f64>().max(1e-12)).ln())
        .collect();
    let sum: f64 = raw.iter().sum();
    DVector::from_vec(
        raw.into_iter()
            .map(|v| 0.9 * v / sum + 0.1 / n as f64)
            .collect(),
    )
}

fn check_three_point(battery: &mut Battery, seed: u64) {
    let mut rng = seeded_stream(seed, 101);
    let ent = MirrorMap::entropy(4).expect("block dim");
    let euc = MirrorMap::euclidean(4).expect("block dim");
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let a = random_simplex(4, &mut rng);
        let b = random_simplex(4, &mut rng);
        let c = random_simplex(4, &mut rng);
        if let Ok(r) = ent.three_point_residual(&a, &b, &c) {
            worst = worst.max(r.abs());
        }
        let x = DVector::from_fn(4, |_, _| 4.0 * (rng.gen::<f64>() - 0.5));
        let y = DVector::from_fn(4, |_, _| 4.0 * (rng.gen::<f64>() - 0.5));
        let z = DVector::from_fn(4, |_, _| 4.0 * (rng.gen::<f64>() - 0.5));
        if let Ok(r) = euc.three_point_residual(&x, &y, &z) {
            worst = worst.max(r.abs());
        }
    }
    battery.record(
        "three_point_identity",
        if worst <= 1e-10 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail(format!("worst residual {worst:.3e}"))
        },
    );
}

fn check_psd_damping(battery: &mut Battery, instance: &ProblemInstance) {
    let graph = instance.graph();
    if graph.num_edges() == 0 {
        battery.record(
            "psd_damping",
            CheckStatus::Skipped("no edges on a single-node graph".into()),
        );
        battery.record(
            "psd_damping_monotone",
            CheckStatus::Skipped("no edges on a single-node graph".into()),
        );
        return;
    }
    let constants = match instance.constants() {
        Ok(c) => c,
        Err(e) => {
            battery.record("psd_damping", CheckStatus::Fail(e.to_string()));
            return;
        }
    };
    match graph.is_psd_damping(constants.inv_gamma) {
        Ok((true, _)) => battery.record("psd_damping", CheckStatus::Pass),
        Ok((false, min_eig)) => battery.record(
            "psd_damping",
            CheckStatus::Fail(format!("min eigenvalue {min_eig:.3e} < -{PSD_TOL:.0e}")),
        ),
        Err(e) => battery.record("psd_damping", CheckStatus::Fail(e.to_string())),
    }

    // Monotonicity of the verdict in α.
    let mut last_ok = true;
    let mut monotone = true;
    for i in 1..=8 {
        let alpha = constants.inv_gamma * 0.35 * i as f64;
        match graph.is_psd_damping(alpha) {
            Ok((ok, _)) => {
                if ok && !last_ok {
                    monotone = false;
                }
                last_ok = ok;
            }
            Err(e) => {
                battery.record("psd_damping_monotone", CheckStatus::Fail(e.to_string()));
                return;
            }
        }
    }
    battery.record(
        "psd_damping_monotone",
        if monotone {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail("PSD verdict not monotone in alpha".into())
        },
    );
}

fn check_mirror_optimality(battery: &mut Battery, seed: u64) {
    let mut rng = seeded_stream(seed, 102);
    let map = MirrorMap::entropy(4).expect("block dim");
    let mut worst = 0.0_f64;
    for _ in 0..40 {
        let xk = random_simplex(4, &mut rng);
        let w = DVector::from_fn(4, |_, _| 6.0 * (rng.gen::<f64>() - 0.5));
        let alpha = 0.2 + rng.gen::<f64>();
        let Ok(xp) = map.mirror_step(&xk, &w, alpha) else {
            battery.record(
                "mirror_step_optimality",
                CheckStatus::Fail("mirror step failed".into()),
            );
            return;
        };
        let term = &w * alpha + map.grad_psi(&xp).unwrap() - map.grad_psi(&xk).unwrap();
        for _ in 0..15 {
            let cand = random_simplex(4, &mut rng);
            worst = worst.min(term.dot(&(cand - &xp)));
        }
    }
    battery.record(
        "mirror_step_optimality",
        if worst >= -1e-8 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail(format!("variational inequality at {worst:.3e}"))
        },
    );
}

fn check_oracle_equivalence(battery: &mut Battery, seed: u64) {
    // Small-scale version of the acceptance oracle check: golden-section
    // minimization, independent of the closed forms.
    let golden = |mut lo: f64, mut hi: f64, f: &dyn Fn(f64) -> f64| {
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-12 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if f(m1) <= f(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        0.5 * (lo + hi)
    };
    let mut rng = seeded_stream(seed, 103);
    let ent = MirrorMap::entropy(2).expect("block dim");
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let x = random_simplex(2, &mut rng);
        let w = DVector::from_fn(2, |_, _| 4.0 * (rng.gen::<f64>() - 0.5));
        let alpha = 0.1 + rng.gen::<f64>();
        let got = ent.mirror_step(&x, &w, alpha).unwrap();
        let t = golden(0.0, 1.0, &|t: f64| {
            let cand = DVector::from_vec(vec![t, 1.0 - t]);
            alpha * w.dot(&cand) + ent.bregman(&cand, &x).unwrap()
        });
        worst = worst.max((got[0] - t).abs());
    }
    let euc = MirrorMap::euclidean(1).expect("block dim");
    for _ in 0..20 {
        let xk = 4.0 * (rng.gen::<f64>() - 0.5);
        let w = 4.0 * (rng.gen::<f64>() - 0.5);
        let alpha = 0.1 + rng.gen::<f64>();
        let theta = rng.gen::<f64>();
        let got = euc
            .composite_mirror_step(
                &DVector::from_element(1, xk),
                &DVector::from_element(1, w),
                alpha,
                theta,
            )
            .unwrap();
        let center = xk - alpha * w;
        let t = golden(center - alpha * theta - 1.0, center + alpha * theta + 1.0, &|t| {
            alpha * w * t + alpha * theta * t.abs() + 0.5 * (t - xk).powi(2)
        });
        worst = worst.max((got[0] - t).abs());
    }
    battery.record(
        "mirror_step_oracle",
        if worst <= 1e-6 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail(format!("worst deviation {worst:.3e}"))
        },
    );
}

fn check_strong_convexity(battery: &mut Battery, seed: u64) {
    let mut rng = seeded_stream(seed, 104);
    let map = MirrorMap::entropy(6).expect("block dim");
    for _ in 0..2000 {
        let x = random_simplex(6, &mut rng);
        let xp = random_simplex(6, &mut rng);
        match map.strong_convexity_probe(&x, &xp) {
            Ok(true) => {}
            Ok(false) => {
                battery.record(
                    "strong_convexity",
                    CheckStatus::Fail("Bregman below half squared distance".into()),
                );
                return;
            }
            Err(e) => {
                battery.record("strong_convexity", CheckStatus::Fail(e.to_string()));
                return;
            }
        }
    }
    battery.record("strong_convexity", CheckStatus::Pass);
}

fn check_mixing_matrix(battery: &mut Battery, instance: &ProblemInstance) {
    let c = DVector::from_fn(instance.block_dim(), |j, _| {
        (j as f64 + 1.0) / instance.block_dim() as f64
    });
    let consensus = instance.consensus_stack(&c).expect("block dims agree");
    match rlcmd_core::solvers::apply_mixing_matrix(instance, &consensus) {
        Ok(mixed) => {
            let drift = (mixed - &consensus).norm();
            battery.record(
                "mixing_doubly_stochastic",
                if drift < 1e-12 {
                    CheckStatus::Pass
                } else {
                    CheckStatus::Fail(format!("consensus drift {drift:.3e}"))
                },
            );
        }
        Err(e) => battery.record("mixing_doubly_stochastic", CheckStatus::Fail(e.to_string())),
    }
}

fn check_reference_gate(
    battery: &mut Battery,
    instance: &ProblemInstance,
    reference: &ReferenceSolution,
) {
    let residual = reference.kkt_residual();
    if residual > REFERENCE_KKT_GATE {
        battery.record(
            "reference_gate",
            CheckStatus::Fail(format!("KKT residual {residual:.3e}")),
        );
        return;
    }
    let x_star = match reference.x_star(instance) {
        Ok(x) => x,
        Err(e) => {
            battery.record("reference_gate", CheckStatus::Fail(e.to_string()));
            return;
        }
    };
    match metrics::duality_gap(instance, reference, &x_star) {
        Ok(gap) if gap.abs() <= 1e-9 => battery.record("reference_gate", CheckStatus::Pass),
        Ok(gap) => battery.record(
            "reference_gate",
            CheckStatus::Fail(format!("gap at optimum {gap:.3e}")),
        ),
        Err(e) => battery.record("reference_gate", CheckStatus::Fail(e.to_string())),
    }
}

fn check_runs(
    battery: &mut Battery,
    config: &ExperimentConfig,
    instance: &ProblemInstance,
    reference: &ReferenceSolution,
    options: &VerifyOptions,
) {
    let iters = config.iters.min(500);
    check_dissipation(battery, config, instance, reference, options, iters);

    for &algorithm in &config.algorithms {
        if algorithm == Algorithm::Dmd && instance.mirror().kind()
            == rlcmd_core::mirror::MirrorKind::Euclidean
        {
            // The unconstrained subgradient baseline overflows under its
            // 1/sqrt(k) schedule at this data scale; its divergence is an
            // experiment outcome, not an invariant to verify.
            battery.record(
                "run_dmd",
                CheckStatus::Skipped(
                    "subgradient baseline diverges on the unconstrained composite setup".into(),
                ),
            );
            continue;
        }
        let name = format!("run_{algorithm}");
        let schedule = match config.schedule_for(algorithm).resolve(
            algorithm,
            instance,
            config.sigma > 0.0,
            iters,
        ) {
            Ok(s) => s,
            Err(e) => {
                battery.record(&name, CheckStatus::Fail(e.to_string()));
                continue;
            }
        };
        let noise = NoiseModel {
            sigma: config.sigma,
            seed: config.seeds[0],
        };
        match run(instance, reference, algorithm, &schedule, &noise, iters) {
            Ok(out) if out.completed() => {
                let damped = matches!(algorithm, Algorithm::Rlc | Algorithm::CoRlc);
                let mut problems = Vec::new();
                if damped {
                    let min_slack = out
                        .trace
                        .records
                        .iter()
                        .map(|r| r.dissipation_slack)
                        .fold(f64::INFINITY, f64::min);
                    if min_slack < -metrics::DISSIPATION_SLACK_TOL {
                        problems.push(format!("dissipation slack {min_slack:.3e}"));
                    }
                    if config.sigma == 0.0 {
                        let worst_rise = out
                            .trace
                            .records
                            .windows(2)
                            .map(|p| p[1].energy - p[0].energy)
                            .fold(f64::NEG_INFINITY, f64::max);
                        if worst_rise > 1e-10 {
                            problems.push(format!("energy rise {worst_rise:.3e}"));
                        }
                        let worst_gap = out
                            .trace
                            .records
                            .iter()
                            .map(|r| r.gap_avg - r.theorem_bound)
                            .fold(f64::NEG_INFINITY, f64::max);
                        if worst_gap > 1e-9 {
                            problems.push(format!("bound violated by {worst_gap:.3e}"));
                        }
                    }
                }
                battery.record(
                    &name,
                    if problems.is_empty() {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail(problems.join("; "))
                    },
                );
            }
            Ok(out) => battery.record(
                &name,
                CheckStatus::Fail(format!("run did not complete: {:?}", out.status)),
            ),
            Err(e) => battery.record(&name, CheckStatus::Fail(e.to_string())),
        }
    }
}

/// Steps the damped iteration manually so the α-override hook can inject an
/// invalid step without tripping schedule validation.
fn check_dissipation(
    battery: &mut Battery,
    config: &ExperimentConfig,
    instance: &ProblemInstance,
    reference: &ReferenceSolution,
    options: &VerifyOptions,
    iters: usize,
) {
    if instance.graph().num_edges() == 0 {
        battery.record(
            "dissipation",
            CheckStatus::Skipped("vacuous without edges".into()),
        );
        return;
    }
    let constants = match instance.constants() {
        Ok(c) => c,
        Err(e) => {
            battery.record("dissipation", CheckStatus::Fail(e.to_string()));
            return;
        }
    };
    let default_alpha = rlcmd_core::solvers::step_cap(
        Algorithm::Rlc,
        &constants,
        config.sigma > 0.0,
    );
    let alpha = options.alpha_override.unwrap_or(default_alpha);
    if alpha > constants.inv_gamma {
        battery.record(
            "dissipation",
            CheckStatus::Fail(format!(
                "step {alpha:.3e} violates the α ≤ 1/γ = {:.3e} precondition",
                constants.inv_gamma
            )),
        );
        return;
    }
    let x_star = reference.x_star(instance).expect("consistent reference");
    let u_star = reference.u_star();
    let mut state = SolverState::init(instance, AverageMode::Uniform);
    let noise = NoiseModel {
        sigma: config.sigma,
        seed: config.seeds[0],
    };
    let mut stream = noise.stream();
    let mut min_slack = f64::INFINITY;
    for _ in 0..iters {
        let prev_x = state.x.clone();
        let prev_u = state.u.clone();
        let eta = stream.sample(instance.primal_dim());
        if let Err(e) = rlc_step(instance, &mut state, alpha, &eta) {
            battery.record("dissipation", CheckStatus::Fail(e.to_string()));
            return;
        }
        match metrics::dissipation_slack_with(
            instance,
            &constants,
            &x_star,
            &u_star,
            (&prev_x, &prev_u),
            (&state.x, &state.u),
            alpha,
            &eta,
        ) {
            Ok(slack) => min_slack = min_slack.min(slack),
            Err(e) => {
                battery.record("dissipation", CheckStatus::Fail(e.to_string()));
                return;
            }
        }
    }
    battery.record(
        "dissipation",
        if min_slack >= -metrics::DISSIPATION_SLACK_TOL {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail(format!("min slack {min_slack:.3e}"))
        },
    );
}
