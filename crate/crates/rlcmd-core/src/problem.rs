//! Per-node objectives, problem instances, instance generation, and the
//! high-accuracy KKT reference solution that all gap/energy metrics depend
//! on.
//!
//! The distributed problem is
//!
//! ```text
//! minimize  Σ_i f_i(x_i) + Σ_i θ‖x_i‖₁     s.t.  E_lᵀ x = 0,  x ∈ X₀^{|V|}
//! ```
//!
//! with quadratic `f_i(v) = ½‖A_i v − b_i‖₂²`. Because all blocks agree at a
//! solution, the reference is computed from the centralized problem
//! `min_{v ∈ X₀} Σ_i f_i(v) + |V|·θ‖v‖₁`, then lifted to a consensus stack
//! and paired with an edge dual recovered as the minimum-norm solution of
//! `E_l u = −d*` for a blockwise-balanced optimality certificate `d*`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{random_graph_with, SpectralConstants, WeightedGraph};
use crate::mirror::{MirrorKind, MirrorMap};
use crate::{Error, Result};

/// Residual gate on the recovered KKT certificate; reference solutions
/// violating it are rejected and the metric layer refuses to run.
pub const REFERENCE_KKT_GATE: f64 = 1e-7;

/// Default stopping tolerance on successive-iterate change in the
/// centralized stage of the reference solve.
pub const REFERENCE_DEFAULT_TOL: f64 = 1e-10;

/// Coordinates of the centralized solution below this threshold are treated
/// as active (zero) when building certificates.
const ACTIVE_COORD_TOL: f64 = 1e-12;

/// RNG stream labels derived from the master seed; separate streams keep
/// the graph and the objective data independent of later concerns (noise).
pub mod streams {
    pub const GRAPH: u64 = 0;
    pub const DATA: u64 = 1;
    pub const NOISE: u64 = 2;
}

/// Returns the ChaCha stream for `(seed, label)`.
pub fn seeded_stream(seed: u64, label: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label);
    rng
}

/// One node's smooth objective `f(v) = ½‖A v − b‖₂²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ObjectiveJson", into = "ObjectiveJson")]
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveJson {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl From<QuadraticObjective> for ObjectiveJson {
    fn from(q: QuadraticObjective) -> Self {
        let a = (0..q.a.nrows())
            .map(|i| (0..q.a.ncols()).map(|j| q.a[(i, j)]).collect())
            .collect();
        ObjectiveJson {
            a,
            b: q.b.iter().copied().collect(),
        }
    }
}

impl TryFrom<ObjectiveJson> for QuadraticObjective {
    type Error = Error;

    fn try_from(raw: ObjectiveJson) -> Result<Self> {
        let rows = raw.a.len();
        let cols = raw.a.first().map_or(0, Vec::len);
        if raw.a.iter().any(|row| row.len() != cols) {
            return Err(Error::InvalidArgument("ragged objective matrix".into()));
        }
        let a = DMatrix::from_fn(rows, cols, |i, j| raw.a[i][j]);
        QuadraticObjective::new(a, DVector::from_vec(raw.b))
    }
}

impl QuadraticObjective {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
                context: "objective rhs",
            });
        }
        if a.ncols() == 0 || a.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "objective matrix must be nonempty".into(),
            ));
        }
        Ok(QuadraticObjective { a, b })
    }

    pub fn input_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn value(&self, v: &DVector<f64>) -> f64 {
        let residual = &self.a * v - &self.b;
        0.5 * residual.norm_squared()
    }

    pub fn gradient(&self, v: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (&self.a * v - &self.b)
    }

    /// Gram matrix `AᵀA` (the Hessian of `f`).
    pub fn gram(&self) -> DMatrix<f64> {
        self.a.transpose() * &self.a
    }

    /// Smoothness constant `λ_max(AᵀA)` via dense symmetric eigensolve.
    pub fn smoothness(&self) -> Result<f64> {
        let gram = self.gram();
        let eig = nalgebra::SymmetricEigen::try_new(gram, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenFailure("objective Gram eigensolve failed".into()))?;
        Ok(eig.eigenvalues.iter().fold(0.0_f64, |acc, &v| acc.max(v)))
    }
}

/// Rule for deriving the inductor weights `l` from the resistor weights `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LRule {
    /// `l = (β + λ)·r`, which makes `1/γ = 1/(β + λ)` coincide with the
    /// smooth step-size cap.
    BetaPlusLambda,
    /// `l = c·r` for a fixed positive factor.
    Scale(f64),
}

/// Parameters for [`generate_instance`]. Defaults are the experimental
/// configuration: 30 nodes, block dimension 30, square objectives, edge
/// probability 0.3, `r = 0.1·𝟙`, `l = (β+λ)·r`, smooth simplex setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub num_nodes: usize,
    pub n: usize,
    pub m: usize,
    pub edge_prob: f64,
    pub r_scale: f64,
    pub l_rule: LRule,
    pub theta: f64,
    pub mirror_kind: MirrorKind,
}

impl Default for InstanceParams {
    fn default() -> Self {
        InstanceParams {
            num_nodes: 30,
            n: 30,
            m: 30,
            edge_prob: 0.3,
            r_scale: 0.1,
            l_rule: LRule::BetaPlusLambda,
            theta: 0.0,
            mirror_kind: MirrorKind::Entropy,
        }
    }
}

impl InstanceParams {
    /// The ℓ1-regularized least-squares configuration (θ = 1/100,
    /// euclidean map on ℝⁿ).
    pub fn l1_default() -> Self {
        InstanceParams {
            theta: 0.01,
            mirror_kind: MirrorKind::Euclidean,
            ..Default::default()
        }
    }
}

/// A fully specified problem: graph, per-node objectives, optional ℓ1
/// regularizer, and the mirror map fixing the feasible set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceJson", into = "InstanceJson")]
pub struct ProblemInstance {
    graph: WeightedGraph,
    objectives: Vec<QuadraticObjective>,
    regularizer_theta: f64,
    mirror: MirrorMap,
    beta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceJson {
    graph: WeightedGraph,
    objectives: Vec<QuadraticObjective>,
    regularizer_theta: f64,
    mirror_kind: MirrorKind,
    block_dim: usize,
}

impl From<ProblemInstance> for InstanceJson {
    fn from(p: ProblemInstance) -> Self {
        InstanceJson {
            graph: p.graph,
            objectives: p.objectives,
            regularizer_theta: p.regularizer_theta,
            mirror_kind: p.mirror.kind(),
            block_dim: p.mirror.block_dim(),
        }
    }
}

impl TryFrom<InstanceJson> for ProblemInstance {
    type Error = Error;

    fn try_from(raw: InstanceJson) -> Result<Self> {
        ProblemInstance::new(
            raw.graph,
            raw.objectives,
            raw.regularizer_theta,
            MirrorMap::new(raw.mirror_kind, raw.block_dim)?,
        )
    }
}

impl ProblemInstance {
    pub fn new(
        graph: WeightedGraph,
        objectives: Vec<QuadraticObjective>,
        regularizer_theta: f64,
        mirror: MirrorMap,
    ) -> Result<Self> {
        if objectives.len() != graph.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: graph.num_nodes(),
                got: objectives.len(),
                context: "one objective per node",
            });
        }
        let n = mirror.block_dim();
        if objectives.iter().any(|o| o.input_dim() != n) {
            return Err(Error::InvalidArgument(format!(
                "all objectives must share block dimension {n}"
            )));
        }
        if regularizer_theta < 0.0 || !regularizer_theta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "ℓ1 weight must be a nonnegative real, got {regularizer_theta}"
            )));
        }
        if mirror.kind() == MirrorKind::Entropy && regularizer_theta > 0.0 {
            return Err(Error::UnsupportedConfiguration(
                "ℓ1 regularization is only supported with the euclidean map on ℝⁿ".into(),
            ));
        }
        let mut beta = 0.0_f64;
        for o in &objectives {
            beta = beta.max(o.smoothness()?);
        }
        Ok(ProblemInstance {
            graph,
            objectives,
            regularizer_theta,
            mirror,
            beta,
        })
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn objectives(&self) -> &[QuadraticObjective] {
        &self.objectives
    }

    pub fn mirror(&self) -> &MirrorMap {
        &self.mirror
    }

    pub fn theta(&self) -> f64 {
        self.regularizer_theta
    }

    pub fn num_nodes(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn block_dim(&self) -> usize {
        self.mirror.block_dim()
    }

    pub fn primal_dim(&self) -> usize {
        self.num_nodes() * self.block_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.graph.num_edges() * self.block_dim()
    }

    /// Global smoothness constant `β = max_i λ_max(A_iᵀA_i)`, computed once
    /// at construction.
    pub fn smoothness_constant(&self) -> f64 {
        self.beta
    }

    /// Spectral constants of the weighted graph paired with this instance's
    /// smoothness constant.
    pub fn constants(&self) -> Result<SpectralConstants> {
        self.graph.spectral_constants(self.beta)
    }

    /// Stacked gradient: block `i` is `A_iᵀ(A_i x_i − b_i)`; there is no
    /// cross-node coupling.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.expect_primal(x)?;
        let n = self.block_dim();
        let mut out = DVector::zeros(x.len());
        for (i, obj) in self.objectives.iter().enumerate() {
            let xi = x.rows(i * n, n).into_owned();
            let gi = obj.gradient(&xi);
            out.rows_mut(i * n, n).copy_from(&gi);
        }
        Ok(out)
    }

    /// `f(x) = Σ_i f_i(x_i)`.
    pub fn objective_value(&self, x: &DVector<f64>) -> Result<f64> {
        self.expect_primal(x)?;
        let n = self.block_dim();
        Ok(self
            .objectives
            .iter()
            .enumerate()
            .map(|(i, obj)| obj.value(&x.rows(i * n, n).into_owned()))
            .sum())
    }

    /// `g(x) = θ Σ_i ‖x_i‖₁` (zero when θ = 0).
    pub fn regularizer_value(&self, x: &DVector<f64>) -> f64 {
        if self.regularizer_theta == 0.0 {
            return 0.0;
        }
        self.regularizer_theta * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Lifts a per-node point to the consensus stack `𝟙 ⊗ v`.
    pub fn consensus_stack(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.block_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.block_dim(),
                got: v.len(),
                context: "consensus stack block",
            });
        }
        let n = self.block_dim();
        let mut out = DVector::zeros(self.primal_dim());
        for i in 0..self.num_nodes() {
            out.rows_mut(i * n, n).copy_from(v);
        }
        Ok(out)
    }

    fn expect_primal(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.primal_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.primal_dim(),
                got: x.len(),
                context: "stacked primal vector",
            });
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization; used to key cached
    /// reference solutions.
    pub fn content_hash(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        let digest = Sha256::digest(&bytes);
        Ok(format!("{digest:x}"))
    }
}

/// Samples a problem instance: Erdős–Rényi graph, i.i.d. standard normal
/// `A_i, b_i`, `r = r_scale·𝟙`, and `l` per the chosen rule. Deterministic
/// per seed; the graph and the data are drawn from separate RNG streams so
/// downstream concerns (noise) never perturb the instance.
pub fn generate_instance(params: &InstanceParams, seed: u64) -> Result<ProblemInstance> {
    if params.r_scale <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "r_scale must be positive, got {}",
            params.r_scale
        )));
    }
    if params.n == 0 || params.m == 0 || params.num_nodes == 0 {
        return Err(Error::InvalidArgument(
            "num_nodes, n, and m must be positive".into(),
        ));
    }
    let mut graph_rng = seeded_stream(seed, streams::GRAPH);
    let topology = random_graph_with(params.num_nodes, params.edge_prob, &mut graph_rng)?;

    let mut data_rng = seeded_stream(seed, streams::DATA);
    let normal = StandardNormal;
    let mut objectives = Vec::with_capacity(params.num_nodes);
    let mut beta = 0.0_f64;
    for _ in 0..params.num_nodes {
        let a = DMatrix::from_fn(params.m, params.n, |_, _| normal.sample(&mut data_rng));
        let b = DVector::from_fn(params.m, |_, _| normal.sample(&mut data_rng));
        let obj = QuadraticObjective::new(a, b)?;
        beta = beta.max(obj.smoothness()?);
        objectives.push(obj);
    }

    let num_edges = topology.num_edges();
    let r = vec![params.r_scale; num_edges];
    let lambda = topology
        .clone()
        .with_weights(vec![1.0; num_edges], r.clone())
        .and_then(|g| g.spectral_constants(beta))?
        .lambda;
    let factor = match params.l_rule {
        LRule::BetaPlusLambda => beta + lambda,
        LRule::Scale(c) => {
            if c <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "l-rule scale must be positive, got {c}"
                )));
            }
            c
        }
    };
    let l: Vec<f64> = r.iter().map(|&re| factor * re).collect();
    let graph = topology.with_weights(l, r)?;

    ProblemInstance::new(
        graph,
        objectives,
        params.theta,
        MirrorMap::new(params.mirror_kind, params.n)?,
    )
}

/// High-accuracy KKT pair for an instance: the consensus primal optimum,
/// a minimum-norm edge dual, the optimal value, and the certificate
/// residual `‖E_l u* + d*‖₂`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceSolution {
    x0_star: Vec<f64>,
    u_star: Vec<f64>,
    optimal_value: f64,
    kkt_residual: f64,
    tol: f64,
}

impl ReferenceSolution {
    /// The centralized optimum `x₀* ∈ ℝⁿ`.
    pub fn x0_star(&self) -> DVector<f64> {
        DVector::from_vec(self.x0_star.clone())
    }

    /// The stacked consensus optimum `x* = 𝟙 ⊗ x₀*`; satisfies
    /// `E_lᵀ x* = 0` exactly.
    pub fn x_star(&self, instance: &ProblemInstance) -> Result<DVector<f64>> {
        instance.consensus_stack(&self.x0_star())
    }

    /// The recovered edge dual `u* ∈ ℝ^{|E|·n}`.
    pub fn u_star(&self) -> DVector<f64> {
        DVector::from_vec(self.u_star.clone())
    }

    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    pub fn kkt_residual(&self) -> f64 {
        self.kkt_residual
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }
}

/// Centralized quadratic data: `F(v) = ½ vᵀHv − cᵀv + const`.
struct Centralized {
    h: DMatrix<f64>,
    c: DVector<f64>,
    big_theta: f64,
    smoothness: f64,
}

impl Centralized {
    fn build(instance: &ProblemInstance) -> Result<Self> {
        let n = instance.block_dim();
        let mut h = DMatrix::zeros(n, n);
        let mut c = DVector::zeros(n);
        for obj in instance.objectives() {
            h += obj.gram();
            c += obj.a.transpose() * &obj.b;
        }
        let eig = nalgebra::SymmetricEigen::try_new(h.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenFailure("centralized Gram eigensolve failed".into()))?;
        let smoothness = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v));
        Ok(Centralized {
            h,
            c,
            big_theta: instance.num_nodes() as f64 * instance.theta(),
            smoothness,
        })
    }

    fn grad(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.h * v - &self.c
    }
}

/// Solves the problem to reference accuracy and recovers the KKT pair.
///
/// Stage 1 solves the centralized problem iteratively (proximal gradient
/// with acceleration on ℝⁿ, entropic mirror descent on the simplex) until
/// the successive-iterate change drops below `tol` or `max_iters` is
/// reached; an active-set polish then solves the identified face exactly.
/// Stage 2 builds a blockwise-balanced certificate `d*` and recovers
/// `u*` as the minimum-norm solution of `E_l u = −d*`.
///
/// Fails with [`Error::ReferenceFailure`] when the certificate residual
/// exceeds [`REFERENCE_KKT_GATE`].
pub fn solve_reference(
    instance: &ProblemInstance,
    tol: f64,
    max_iters: usize,
) -> Result<ReferenceSolution> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "reference tolerance must be positive, got {tol}"
        )));
    }
    let central = Centralized::build(instance)?;
    let num_nodes = instance.num_nodes() as f64;
    let n = instance.block_dim();

    let (v_star, certificate) = match instance.mirror().kind() {
        MirrorKind::Euclidean => solve_centralized_l1(&central, tol, max_iters)?,
        MirrorKind::Entropy => solve_centralized_simplex(&central, tol, max_iters)?,
    };

    // d_i* = ∇f_i(x₀*) + (shared certificate shift)/|V|; Σ_i d_i* then
    // equals the centralized KKT residual, and its consensus component is
    // exactly what the edge dual cannot absorb.
    let mut d = DVector::zeros(instance.primal_dim());
    for (i, obj) in instance.objectives().iter().enumerate() {
        let mut di = obj.gradient(&v_star);
        di += &certificate / num_nodes;
        d.rows_mut(i * n, n).copy_from(&di);
    }

    let u_star = instance.graph().min_norm_edge_solve(&(-&d), n)?;
    let back = instance.graph().apply_el(&u_star, n)?;
    let kkt_residual = (back + &d).norm();
    if kkt_residual > REFERENCE_KKT_GATE {
        return Err(Error::ReferenceFailure {
            residual: kkt_residual,
            gate: REFERENCE_KKT_GATE,
        });
    }

    let x_star = instance.consensus_stack(&v_star)?;
    let optimal_value = instance.objective_value(&x_star)? + instance.regularizer_value(&x_star);

    Ok(ReferenceSolution {
        x0_star: v_star.iter().copied().collect(),
        u_star: u_star.iter().copied().collect(),
        optimal_value,
        kkt_residual,
        tol,
    })
}

/// Centralized solve on ℝⁿ with ℓ1 weight Θ = |V|·θ (plain least squares
/// when Θ = 0). Returns the optimum `v*` and the shared certificate shift:
/// `Θ·s*` with `s* ∈ ∂‖v*‖₁` for ℓ1, zero for the smooth case.
fn solve_centralized_l1(
    central: &Centralized,
    tol: f64,
    max_iters: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = central.c.len();
    if central.big_theta == 0.0 {
        // Accelerated-gradient limit: the normal equations, solved exactly.
        let v = solve_spd(&central.h, &central.c)?;
        return Ok((v, DVector::zeros(n)));
    }

    // Stage 1: proximal gradient with acceleration, step 1/L.
    let step = 1.0 / central.smoothness.max(f64::MIN_POSITIVE);
    let shrink = central.big_theta * step;
    let mut v = DVector::<f64>::zeros(n);
    let mut y = v.clone();
    let mut t = 1.0_f64;
    for _ in 0..max_iters {
        let grad = central.grad(&y);
        let v_next = crate::mirror::soft_threshold(&(&y - grad * step), shrink);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        y = &v_next + (&v_next - &v) * momentum;
        let change = (&v_next - &v).norm();
        v = v_next;
        t = t_next;
        if change < tol {
            break;
        }
    }

    // Active-set polish: on the support S the optimum satisfies
    // H_SS v_S = c_S − Θ·sign(v_S); off-support |∇F_j| ≤ Θ.
    let mut support: Vec<usize> = (0..n).filter(|&j| v[j].abs() > ACTIVE_COORD_TOL).collect();
    let mut signs: Vec<f64> = support.iter().map(|&j| v[j].signum()).collect();
    for _ in 0..100 {
        let mut cand = DVector::zeros(n);
        if !support.is_empty() {
            let k = support.len();
            let h_ss = DMatrix::from_fn(k, k, |p, q| central.h[(support[p], support[q])]);
            let rhs = DVector::from_fn(k, |p, _| {
                central.c[support[p]] - central.big_theta * signs[p]
            });
            let sol = solve_spd(&h_ss, &rhs)?;
            for (p, &j) in support.iter().enumerate() {
                cand[j] = sol[p];
            }
        }
        // Coordinates whose sign flipped leave the support.
        let flipped: Vec<usize> = support
            .iter()
            .enumerate()
            .filter(|&(p, &j)| cand[j] * signs[p] <= 0.0)
            .map(|(p, _)| p)
            .collect();
        if !flipped.is_empty() {
            for &p in flipped.iter().rev() {
                support.remove(p);
                signs.remove(p);
            }
            continue;
        }
        // Worst off-support violation of |∇F_j| ≤ Θ enters.
        let grad = central.grad(&cand);
        let mut worst: Option<(usize, f64)> = None;
        for j in 0..n {
            if support.contains(&j) {
                continue;
            }
            let excess = grad[j].abs() - central.big_theta;
            if excess > 1e-12 && worst.is_none_or(|(_, w)| excess > w) {
                worst = Some((j, excess));
            }
        }
        v = cand;
        match worst {
            Some((j, _)) => {
                let g = central.grad(&v);
                support.push(j);
                signs.push(-g[j].signum());
            }
            None => break,
        }
    }

    // Shared subgradient s*: exact signs on the support, clamped gradient
    // ratio off it.
    let grad = central.grad(&v);
    let mut s = DVector::zeros(n);
    for j in 0..n {
        if v[j] != 0.0 {
            s[j] = v[j].signum();
        } else {
            s[j] = (-grad[j] / central.big_theta).clamp(-1.0, 1.0);
        }
    }
    Ok((v, s * central.big_theta))
}

/// Centralized solve over the probability simplex. Returns the optimum and
/// the certificate shift `−μ𝟙 − ν` from the simplex KKT conditions
/// (`∇F(v*) = μ𝟙 + ν` with `ν ≥ 0` supported on the active coordinates).
fn solve_centralized_simplex(
    central: &Centralized,
    tol: f64,
    max_iters: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = central.c.len();
    let map = MirrorMap::entropy(n)?;
    let step = 1.0 / central.smoothness.max(f64::MIN_POSITIVE);
    let mut v = map.initial_point(1);
    for _ in 0..max_iters {
        let grad = central.grad(&v);
        let next = map.mirror_step(&v, &grad, step)?;
        let change = (&next - &v).norm();
        v = next;
        if change < tol {
            break;
        }
    }

    // Active-set polish: solve the equality-constrained QP on the inactive
    // face through the bordered KKT system, exchanging coordinates until
    // primal feasibility (v_I ≥ 0) and dual feasibility (ν_J ≥ 0) hold.
    let mut active: Vec<bool> = (0..n).map(|j| v[j] < 1e-8).collect();
    if active.iter().all(|&a| a) {
        active = vec![false; n];
    }
    let mut mu = 0.0;
    for _ in 0..200 {
        let inactive: Vec<usize> = (0..n).filter(|&j| !active[j]).collect();
        let k = inactive.len();
        // Bordered system: [H_II 𝟙; 𝟙ᵀ 0]·[v_I; μ] = [c_I; 1].
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        for p in 0..k {
            for q in 0..k {
                kkt[(p, q)] = central.h[(inactive[p], inactive[q])];
            }
            kkt[(p, k)] = 1.0;
            kkt[(k, p)] = 1.0;
        }
        let mut rhs = DVector::zeros(k + 1);
        for p in 0..k {
            rhs[p] = central.c[inactive[p]];
        }
        rhs[k] = 1.0;
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SolverInternal("singular simplex KKT system".into()))?;
        let mut cand = DVector::zeros(n);
        for (p, &j) in inactive.iter().enumerate() {
            cand[j] = sol[p];
        }
        // The bordered solve gives H_II v_I + s·𝟙 = c_I, i.e. ∇F_I = −s·𝟙;
        // with the convention ∇F(v*) = μ𝟙 + ν the multiplier is μ = −s.
        mu = -sol[k];

        // Most negative primal coordinate leaves the face.
        let neg = inactive
            .iter()
            .copied()
            .filter(|&j| cand[j] < 0.0)
            .min_by(|&a, &b| cand[a].total_cmp(&cand[b]));
        if let Some(j) = neg {
            active[j] = true;
            continue;
        }
        // Most negative multiplier re-enters.
        let grad = central.grad(&cand);
        let entering = (0..n)
            .filter(|&j| active[j])
            .map(|j| (j, grad[j] - mu))
            .filter(|&(_, nu)| nu < -1e-12)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        v = cand;
        match entering {
            Some((j, _)) => active[j] = false,
            None => break,
        }
    }

    let grad = central.grad(&v);
    let mut shift = DVector::from_element(n, -mu);
    for j in 0..n {
        if active[j] && v[j] < ACTIVE_COORD_TOL {
            shift[j] -= (grad[j] - mu).max(0.0);
        }
    }
    Ok((v, shift))
}

/// Solves `M x = b` for symmetric positive definite `M`, falling back to a
/// pseudo-inverse (minimum-norm) solve when the Cholesky factorization
/// fails.
fn solve_spd(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = nalgebra::Cholesky::new(m.clone()) {
        return Ok(chol.solve(b));
    }
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::EigenFailure("SPD solve eigen fallback failed".into()))?;
    let max_val = eig.eigenvalues.iter().fold(0.0_f64, |a, &v| a.max(v.abs()));
    let cutoff = max_val * 1e-13;
    let coeffs = eig.eigenvectors.transpose() * b;
    let mut x = DVector::zeros(b.len());
    for (k, &val) in eig.eigenvalues.iter().enumerate() {
        if val.abs() > cutoff {
            x += eig.eigenvectors.column(k) * (coeffs[k] / val);
        }
    }
    Ok(x)
}
