//! The four iterative algorithms behind a shared stepping interface:
//!
//! - `rlc`: Euler-forward discretization of the damped primal-dual (RLC)
//!   dynamics. One gradient evaluation and one neighbor-exchange round per
//!   iteration.
//! - `co_rlc`: the same iteration with an ℓ1 term folded into the x-update
//!   through the shrinkage operator.
//! - `mirror_prox`: the predictor-corrector baseline on the undamped
//!   dynamics; two gradient evaluations and two exchange rounds per
//!   iteration.
//! - `dmd`: distributed mirror descent (consensus-then-descent with a
//!   doubly stochastic mixing matrix and 1/√k steps); the regularizer
//!   enters through its subgradient rather than shrinkage.
//!
//! Step sizes are produced by [`StepSchedule`]; constant schedules are
//! capped at construction by the per-algorithm bounds
//! (`min{1/(β+λ), 1/γ}` noiseless, `min{1/(2(β+λ)), 1/γ}` noisy for the
//! damped iteration; `min{1/(2β), 1/(2√(γλ))}` for mirror-prox).

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::SpectralConstants;
use crate::metrics::{self, IterationRecord, IterationTrace, TraceMeta};
use crate::mirror::{l1_subgradient, MirrorKind};
use crate::problem::{seeded_stream, streams, ProblemInstance, ReferenceSolution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rlc,
    CoRlc,
    MirrorProx,
    Dmd,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Rlc => "rlc",
            Algorithm::CoRlc => "co_rlc",
            Algorithm::MirrorProx => "mirror_prox",
            Algorithm::Dmd => "dmd",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the running average of the primal iterates is weighted. Derived
/// from the schedule kind, not user-set: constant schedules average
/// uniformly, varying schedules weight by the step sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMode {
    Uniform,
    StepWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    OneOverSqrtK,
    FixedHorizon,
}

/// Step-size policy `α^k`. Constant schedules are validated against the
/// per-algorithm cap at construction; the other kinds only require a
/// positive base step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    kind: ScheduleKind,
    alpha0: f64,
    horizon: usize,
}

/// Largest constant step admitted for `algorithm` on this instance.
/// Returns infinity when no cap binds (e.g. an edgeless graph with a flat
/// objective).
pub fn step_cap(
    algorithm: Algorithm,
    constants: &SpectralConstants,
    noisy: bool,
) -> f64 {
    let SpectralConstants {
        lambda,
        inv_gamma,
        beta,
    } = *constants;
    match algorithm {
        Algorithm::Rlc | Algorithm::CoRlc => {
            let smooth_cap = if noisy {
                1.0 / (2.0 * (beta + lambda))
            } else {
                1.0 / (beta + lambda)
            };
            smooth_cap.min(inv_gamma)
        }
        Algorithm::MirrorProx => {
            // 1/(2·sqrt(γλ)) written through 1/γ to stay finite on
            // edgeless graphs.
            let wave_cap = 0.5 * (inv_gamma / lambda).sqrt();
            (1.0 / (2.0 * beta)).min(wave_cap)
        }
        Algorithm::Dmd => f64::INFINITY,
    }
}

impl StepSchedule {
    /// Constant step `α^k ≡ alpha0`, validated against the cap for
    /// `algorithm` (noiseless or noisy variant per `noisy`).
    pub fn constant(
        alpha0: f64,
        algorithm: Algorithm,
        instance: &ProblemInstance,
        noisy: bool,
    ) -> Result<Self> {
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "constant step must be positive and finite, got {alpha0}"
            )));
        }
        let cap = step_cap(algorithm, &instance.constants()?, noisy);
        if alpha0 > cap {
            return Err(Error::StepSizeCap {
                alpha: alpha0,
                cap,
                algorithm: algorithm.name(),
            });
        }
        Ok(StepSchedule {
            kind: ScheduleKind::Constant,
            alpha0,
            horizon: 0,
        })
    }

    /// Constant step at exactly the cap for `algorithm` (the choice used in
    /// the experiments; with `l = (β+λ)·r` this is `1/(β+λ)` noiseless).
    pub fn auto_constant(
        algorithm: Algorithm,
        instance: &ProblemInstance,
        noisy: bool,
    ) -> Result<Self> {
        let cap = step_cap(algorithm, &instance.constants()?, noisy);
        let alpha0 = if cap.is_finite() { cap } else { 1.0 };
        Ok(StepSchedule {
            kind: ScheduleKind::Constant,
            alpha0,
            horizon: 0,
        })
    }

    /// `α^k = alpha0/√k` (the distributed mirror descent policy with
    /// `alpha0 = 1`).
    pub fn one_over_sqrt_k(alpha0: f64) -> Result<Self> {
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "base step must be positive and finite, got {alpha0}"
            )));
        }
        Ok(StepSchedule {
            kind: ScheduleKind::OneOverSqrtK,
            alpha0,
            horizon: 0,
        })
    }

    /// `α^k ≡ alpha0/√K` for a computation budget of `K` iterations fixed
    /// in advance.
    pub fn fixed_horizon(alpha0: f64, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument(
                "fixed-horizon schedule needs a positive horizon".into(),
            ));
        }
        if !alpha0.is_finite() || alpha0 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "base step must be positive and finite, got {alpha0}"
            )));
        }
        Ok(StepSchedule {
            kind: ScheduleKind::FixedHorizon,
            alpha0,
            horizon,
        })
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The step for iteration `k ≥ 1`.
    pub fn alpha(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self.kind {
            ScheduleKind::Constant => self.alpha0,
            ScheduleKind::OneOverSqrtK => self.alpha0 / (k as f64).sqrt(),
            ScheduleKind::FixedHorizon => self.alpha0 / (self.horizon as f64).sqrt(),
        }
    }

    /// The constant step value, when the schedule is in fact constant.
    pub fn constant_value(&self) -> Option<f64> {
        match self.kind {
            ScheduleKind::Constant => Some(self.alpha0),
            ScheduleKind::FixedHorizon => Some(self.alpha(1)),
            ScheduleKind::OneOverSqrtK => None,
        }
    }

    pub fn average_mode(&self) -> AverageMode {
        match self.kind {
            ScheduleKind::Constant => AverageMode::Uniform,
            ScheduleKind::OneOverSqrtK | ScheduleKind::FixedHorizon => AverageMode::StepWeighted,
        }
    }

    /// Re-checks the constant-schedule cap for a concrete run context.
    pub fn validate_for(
        &self,
        algorithm: Algorithm,
        instance: &ProblemInstance,
        noisy: bool,
    ) -> Result<()> {
        if algorithm == Algorithm::Dmd && self.kind != ScheduleKind::OneOverSqrtK {
            return Err(Error::UnsupportedConfiguration(
                "distributed mirror descent requires the 1/sqrt(k) schedule".into(),
            ));
        }
        if self.kind == ScheduleKind::Constant {
            let cap = step_cap(algorithm, &instance.constants()?, noisy);
            if self.alpha0 > cap {
                return Err(Error::StepSizeCap {
                    alpha: self.alpha0,
                    cap,
                    algorithm: algorithm.name(),
                });
            }
        }
        Ok(())
    }
}

/// Zero-mean i.i.d. Gaussian gradient noise with per-coordinate standard
/// deviation `sigma`, so `E‖η‖² = |V|·n·σ²`. Drawn from its own RNG stream
/// derived from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn noiseless(seed: u64) -> Self {
        NoiseModel { sigma: 0.0, seed }
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream {
            sigma: self.sigma,
            rng: seeded_stream(self.seed, streams::NOISE),
        }
    }

    /// The variance bound `σ̄² = |V|·n·σ²` entering the noisy-gradient
    /// convergence bound.
    pub fn variance_bound(&self, instance: &ProblemInstance) -> f64 {
        instance.primal_dim() as f64 * self.sigma * self.sigma
    }
}

/// Stateful sampler for one run's noise sequence.
pub struct NoiseStream {
    sigma: f64,
    rng: rand_chacha::ChaCha8Rng,
}

impl NoiseStream {
    pub fn sample(&mut self, dim: usize) -> DVector<f64> {
        if self.sigma == 0.0 {
            return DVector::zeros(dim);
        }
        let normal = StandardNormal;
        DVector::from_fn(dim, |_, _| {
            self.sigma * <StandardNormal as Distribution<f64>>::sample(&normal, &mut self.rng)
        })
    }
}

/// Per-iteration cost counters. An exchange round is one synchronized
/// neighbor communication (any fused combination of `L_r x`, `E_l u`, and
/// the return-path `E_lᵀ x`); `edge_messages` counts one message per
/// directed edge per round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub gradient_evaluations: u64,
    pub neighbor_exchanges: u64,
    pub edge_messages: u64,
}

/// Full solver state: stacked primal `x ∈ ℝ^{|V|·n}`, edge dual
/// `u ∈ ℝ^{|E|·n}`, the running average of `x^{k+1}`, and cost counters.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    k: usize,
    avg_accum: DVector<f64>,
    avg_weight: f64,
    average_mode: AverageMode,
    counters: CostCounters,
}

impl SolverState {
    /// Fresh state: `x¹` is the mirror map's initial point (uniform simplex
    /// blocks or the origin), `u¹ = 0`, counter at 1.
    pub fn init(instance: &ProblemInstance, average_mode: AverageMode) -> Self {
        SolverState {
            x: instance.mirror().initial_point(instance.num_nodes()),
            u: DVector::zeros(instance.dual_dim()),
            k: 1,
            avg_accum: DVector::zeros(instance.primal_dim()),
            avg_weight: 0.0,
            average_mode,
            counters: CostCounters::default(),
        }
    }

    /// State starting from a caller-chosen pair (used by fixed-point and
    /// warm-start tests).
    pub fn with_start(
        instance: &ProblemInstance,
        x: DVector<f64>,
        u: DVector<f64>,
        average_mode: AverageMode,
    ) -> Result<Self> {
        if x.len() != instance.primal_dim() {
            return Err(Error::DimensionMismatch {
                expected: instance.primal_dim(),
                got: x.len(),
                context: "solver start x",
            });
        }
        if u.len() != instance.dual_dim() {
            return Err(Error::DimensionMismatch {
                expected: instance.dual_dim(),
                got: u.len(),
                context: "solver start u",
            });
        }
        instance.mirror().check_domain(&x, true)?;
        let avg_accum = DVector::zeros(x.len());
        Ok(SolverState {
            x,
            u,
            k: 1,
            avg_accum,
            avg_weight: 0.0,
            average_mode,
            counters: CostCounters::default(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    pub fn average_mode(&self) -> AverageMode {
        self.average_mode
    }

    /// The averaged iterate `x̄^K` (uniform or step-weighted over the
    /// post-update iterates `x^{k+1}`); `None` before the first step.
    pub fn averaged_iterate(&self) -> Option<DVector<f64>> {
        if self.avg_weight == 0.0 {
            return None;
        }
        Some(&self.avg_accum / self.avg_weight)
    }

    fn absorb_average(&mut self, alpha: f64) {
        let weight = match self.average_mode {
            AverageMode::Uniform => 1.0,
            AverageMode::StepWeighted => alpha,
        };
        self.avg_accum.axpy(weight, &self.x, 1.0);
        self.avg_weight += weight;
    }

    fn charge(&mut self, gradients: u64, exchanges: u64, num_edges: usize) {
        self.counters.gradient_evaluations += gradients;
        self.counters.neighbor_exchanges += exchanges;
        self.counters.edge_messages += exchanges * 2 * num_edges as u64;
    }
}

fn check_iterate_domain(instance: &ProblemInstance, x: &DVector<f64>) -> Result<()> {
    instance.mirror().check_domain(x, true).map_err(|e| {
        Error::SolverInternal(format!("iterate left the feasible domain: {e}"))
    })
}

/// One damped primal-dual step:
/// `w = L_r x + E_l u + ∇f(x) + η`, `x⁺ = mirror_step(x, w, α)`,
/// `u⁺ = u + α E_lᵀ x⁺`. The two operator applications ride a single
/// exchange round.
pub fn rlc_step(
    instance: &ProblemInstance,
    state: &mut SolverState,
    alpha: f64,
    eta: &DVector<f64>,
) -> Result<()> {
    damped_step(instance, state, alpha, eta, false)
}

/// The composite variant: identical to [`rlc_step`] except the x-update
/// applies shrinkage at level `α·θ`.
pub fn co_rlc_step(
    instance: &ProblemInstance,
    state: &mut SolverState,
    alpha: f64,
    eta: &DVector<f64>,
) -> Result<()> {
    damped_step(instance, state, alpha, eta, true)
}

fn damped_step(
    instance: &ProblemInstance,
    state: &mut SolverState,
    alpha: f64,
    eta: &DVector<f64>,
    composite: bool,
) -> Result<()> {
    let n = instance.block_dim();
    let graph = instance.graph();
    let mut w = graph.apply_lr(&state.x, n)?;
    w += graph.apply_el(&state.u, n)?;
    w += instance.gradient(&state.x)?;
    w += eta;
    let x_next = if composite {
        instance
            .mirror()
            .composite_mirror_step(&state.x, &w, alpha, instance.theta())?
    } else {
        instance.mirror().mirror_step(&state.x, &w, alpha)?
    };
    check_iterate_domain(instance, &x_next)?;
    let du = graph.apply_el_t(&x_next, n)?;
    state.u.axpy(alpha, &du, 1.0);
    state.x = x_next;
    state.charge(1, 1, graph.num_edges());
    state.absorb_average(alpha);
    state.k += 1;
    Ok(())
}

/// One mirror-prox (predictor-corrector) step. Predictor `(y, v)` from
/// `(x, u)`, corrector from gradients at the predictor; costs two gradient
/// evaluations and two exchange rounds. With θ > 0 the shrinkage operator
/// is applied inside both argmins.
pub fn mirror_prox_step(
    instance: &ProblemInstance,
    state: &mut SolverState,
    alpha: f64,
    eta_predictor: &DVector<f64>,
    eta_corrector: &DVector<f64>,
) -> Result<()> {
    let n = instance.block_dim();
    let graph = instance.graph();
    let composite = instance.theta() > 0.0;
    let argmin = |center: &DVector<f64>, dir: &DVector<f64>| -> Result<DVector<f64>> {
        if composite {
            instance
                .mirror()
                .composite_mirror_step(center, dir, alpha, instance.theta())
        } else {
            instance.mirror().mirror_step(center, dir, alpha)
        }
    };

    let mut dir_y = graph.apply_el(&state.u, n)?;
    dir_y += instance.gradient(&state.x)?;
    dir_y += eta_predictor;
    let y = argmin(&state.x, &dir_y)?;
    let v = &state.u + graph.apply_el_t(&state.x, n)? * alpha;

    let mut dir_x = graph.apply_el(&v, n)?;
    dir_x += instance.gradient(&y)?;
    dir_x += eta_corrector;
    let x_next = argmin(&state.x, &dir_x)?;
    check_iterate_domain(instance, &x_next)?;
    let du = graph.apply_el_t(&y, n)?;

    state.u.axpy(alpha, &du, 1.0);
    state.x = x_next;
    state.charge(2, 2, graph.num_edges());
    state.absorb_average(alpha);
    state.k += 1;
    Ok(())
}

/// One distributed mirror descent step (consensus-then-descent):
/// `z = P x` with `P = (I − L/(1+Δ)) ⊗ I_n` built from the unweighted
/// Laplacian, then `x⁺ = mirror_step(z, ∇f(z) + θ·∂‖z‖₁ + η, α)`.
/// No dual variable is maintained.
pub fn dmd_step(
    instance: &ProblemInstance,
    state: &mut SolverState,
    alpha: f64,
    eta: &DVector<f64>,
) -> Result<()> {
    let n = instance.block_dim();
    let z = apply_mixing_matrix(instance, &state.x)?;
    let mut w = instance.gradient(&z)?;
    if instance.theta() > 0.0 {
        w += l1_subgradient(&z) * instance.theta();
    }
    w += eta;
    let x_next = instance.mirror().mirror_step(&z, &w, alpha)?;
    check_iterate_domain(instance, &x_next)?;
    state.x = x_next;
    state.charge(1, 1, instance.graph().num_edges());
    state.absorb_average(alpha);
    state.k += 1;
    let _ = n;
    Ok(())
}

/// Applies the doubly stochastic mixing matrix `P = I − L(𝒢)/(1+Δ)`
/// blockwise, where `L` is the unweighted Laplacian and `Δ` its largest
/// diagonal entry.
pub fn apply_mixing_matrix(
    instance: &ProblemInstance,
    x: &DVector<f64>,
) -> Result<DVector<f64>> {
    if x.len() != instance.primal_dim() {
        return Err(Error::DimensionMismatch {
            expected: instance.primal_dim(),
            got: x.len(),
            context: "mixing matrix input",
        });
    }
    let n = instance.block_dim();
    let graph = instance.graph();
    let scale = 1.0 / (1.0 + graph.max_degree() as f64);
    let mut out = x.clone();
    for &(a, b) in graph.edges() {
        for d in 0..n {
            let diff = scale * (x[a * n + d] - x[b * n + d]);
            out[a * n + d] -= diff;
            out[b * n + d] += diff;
        }
    }
    Ok(out)
}

/// Terminal condition of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    /// The iterate left the feasible domain (in practice: floating-point
    /// overflow of an unstable baseline). The trace holds the prefix up to
    /// the last finite iterate; the true gap past this point exceeds what
    /// f64 can represent.
    Diverged { at_iteration: usize, reason: String },
}

/// Everything a finished run reports: the per-iteration trace, the final
/// state, and whether the run completed or diverged.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: IterationTrace,
    pub final_state: SolverState,
    pub status: RunStatus,
}

impl RunOutput {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }
}

/// Runs `algorithm` for `iters` iterations from the standard
/// initialization, recording the full metric trace. Deterministic per
/// `(instance, noise seed, algorithm, schedule)`.
pub fn run(
    instance: &ProblemInstance,
    reference: &ReferenceSolution,
    algorithm: Algorithm,
    schedule: &StepSchedule,
    noise: &NoiseModel,
    iters: usize,
) -> Result<RunOutput> {
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "a run needs at least one iteration".into(),
        ));
    }
    schedule.validate_for(algorithm, instance, noise.sigma > 0.0)?;
    if algorithm == Algorithm::CoRlc {
        if instance.theta() == 0.0 {
            return Err(Error::UnsupportedConfiguration(
                "co_rlc expects a composite instance (θ > 0); use rlc for the smooth problem"
                    .into(),
            ));
        }
        if instance.mirror().kind() != MirrorKind::Euclidean {
            return Err(Error::UnsupportedConfiguration(
                "co_rlc requires the euclidean map".into(),
            ));
        }
    }

    let constants = instance.constants()?;
    let dim = instance.primal_dim();
    let mut state = SolverState::init(instance, schedule.average_mode());
    let mut noise_stream = noise.stream();
    let x_star = reference.x_star(instance)?;
    let u_star = reference.u_star();
    let initial_energy = metrics::energy(instance, reference, &state.x, &state.u)?;
    let sigma_bar_sq = noise.variance_bound(instance);
    let bounds = metrics::theorem_bound_series(initial_energy, schedule, sigma_bar_sq, iters);

    // Dissipation is only a proven property of the damped iteration, and
    // its evaluation requires α ≤ 1/γ.
    let record_dissipation = matches!(algorithm, Algorithm::Rlc | Algorithm::CoRlc);

    let mut status = RunStatus::Completed;
    let mut records = Vec::with_capacity(iters);
    for k in 1..=iters {
        let alpha = schedule.alpha(k);
        let prev_x = state.x.clone();
        let prev_u = state.u.clone();
        let energy_before = metrics::energy(instance, reference, &prev_x, &prev_u)?;
        let consensus_residual = instance
            .graph()
            .apply_el_t(&prev_x, instance.block_dim())?
            .norm();

        let eta = noise_stream.sample(dim);
        let step_result = match algorithm {
            Algorithm::Rlc => rlc_step(instance, &mut state, alpha, &eta),
            Algorithm::CoRlc => co_rlc_step(instance, &mut state, alpha, &eta),
            Algorithm::MirrorProx => {
                let eta2 = noise_stream.sample(dim);
                mirror_prox_step(instance, &mut state, alpha, &eta, &eta2)
            }
            Algorithm::Dmd => dmd_step(instance, &mut state, alpha, &eta),
        };
        match step_result {
            Ok(()) => {}
            Err(Error::SolverInternal(reason)) => {
                // Numerical divergence: keep the trace prefix and report.
                // Steps validate before mutating, so the state still holds
                // the last accepted iterate.
                status = RunStatus::Diverged {
                    at_iteration: k,
                    reason,
                };
                break;
            }
            Err(e) => return Err(e),
        }

        let avg = state
            .averaged_iterate()
            .expect("average exists after a step");
        let gap_avg = metrics::duality_gap(instance, reference, &avg)?;
        let gap_inst = metrics::duality_gap(instance, reference, &state.x)?;
        let dissipation_slack = if record_dissipation {
            metrics::dissipation_slack_with(
                instance,
                &constants,
                &x_star,
                &u_star,
                (&prev_x, &prev_u),
                (&state.x, &state.u),
                alpha,
                &eta,
            )?
        } else {
            f64::NAN
        };

        records.push(IterationRecord {
            k,
            gap_avg,
            gap_inst,
            energy: energy_before,
            consensus_residual,
            dissipation_slack,
            theorem_bound: bounds[k - 1],
            grad_evals: state.counters().gradient_evaluations,
            exchanges: state.counters().neighbor_exchanges,
        });
    }

    let trace = IterationTrace {
        meta: TraceMeta {
            algorithm,
            schedule: *schedule,
            sigma: noise.sigma,
            seed: noise.seed,
            initial_energy,
            sigma_bar_sq,
        },
        records,
    };
    Ok(RunOutput {
        trace,
        final_state: state,
        status,
    })
}
