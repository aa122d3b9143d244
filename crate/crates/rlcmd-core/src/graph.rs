//! Undirected weighted graphs and the incidence / Laplacian operators that
//! parameterize the solvers.
//!
//! Every edge `{i, j}` carries two positive weights: `l` (inductor
//! coefficient) and `r` (edge-resistor coefficient). From these we derive
//! the operators
//!
//! ```text
//! E_l = (E diag(sqrt(l))) ⊗ I_n      L_r = (E diag(r) Eᵀ) ⊗ I_n
//! ```
//!
//! where `E` is the oriented incidence matrix. Operator application is
//! matrix-free (edge gather/scatter); dense forms are only assembled for
//! the small `|V| × |V|` eigenproblems and in tests.
//!
//! Orientation convention: the head of every edge is the smaller node index,
//! so the incidence column of `{i, j}` with `i < j` is `+1` at row `i` and
//! `-1` at row `j`. All Laplacian-type quantities are orientation-invariant;
//! fixing the convention makes traces reproducible.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Retry budget when sampling for a connected Erdős–Rényi graph.
const CONNECTIVITY_RETRIES: usize = 100;

/// Relative threshold below which an eigenvalue of a PSD matrix is treated
/// as zero (nullspace detection in pseudo-inverse computations).
const NULLSPACE_REL_TOL: f64 = 1e-12;

/// Absolute tolerance for the positive semi-definiteness check.
pub const PSD_TOL: f64 = 1e-10;

/// Undirected connected graph with per-edge weights `l` and `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphJson", try_from = "GraphJson")]
pub struct WeightedGraph {
    num_nodes: usize,
    /// Edges stored as `(head, tail)` with `head < tail`.
    edges: Vec<(usize, usize)>,
    l: Vec<f64>,
    r: Vec<f64>,
}

/// Wire format: `{"num_nodes": .., "edges": [[i,j],..], "l": [..], "r": [..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    l: Vec<f64>,
    r: Vec<f64>,
}

impl From<WeightedGraph> for GraphJson {
    fn from(g: WeightedGraph) -> Self {
        GraphJson {
            num_nodes: g.num_nodes,
            edges: g.edges,
            l: g.l,
            r: g.r,
        }
    }
}

impl TryFrom<GraphJson> for WeightedGraph {
    type Error = Error;

    fn try_from(raw: GraphJson) -> Result<Self> {
        WeightedGraph::new(raw.num_nodes, raw.edges, raw.l, raw.r)
    }
}

impl WeightedGraph {
    /// Builds a validated graph. Edge pairs are canonicalized to
    /// `(min, max)`; duplicates (regardless of orientation), self-loops,
    /// out-of-range nodes, non-positive weights, and disconnected
    /// topologies are rejected.
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        l: Vec<f64>,
        r: Vec<f64>,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::InvalidArgument(
                "graph must have at least one node".into(),
            ));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        let mut seen = std::collections::HashSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            let index = i.max(j);
            if index >= num_nodes {
                return Err(Error::NodeOutOfRange { index, num_nodes });
            }
            let e = (i.min(j), i.max(j));
            if !seen.insert(e) {
                return Err(Error::DuplicateEdge(e.0, e.1));
            }
            canonical.push(e);
        }
        check_weights("l", &l, canonical.len())?;
        check_weights("r", &r, canonical.len())?;
        let g = WeightedGraph {
            num_nodes,
            edges: canonical,
            l,
            r,
        };
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// Replaces both weight vectors, revalidating lengths and positivity.
    pub fn with_weights(self, l: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        WeightedGraph::new(self.num_nodes, self.edges, l, r)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges in canonical `(head, tail)` order, `head < tail`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn l(&self) -> &[f64] {
        &self.l
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut visited = vec![false; self.num_nodes];
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            if visited[v] {
                continue;
            }
            visited[v] = true;
            stack.extend(adj[v].iter().copied().filter(|&w| !visited[w]));
        }
        visited.iter().all(|&v| v)
    }

    /// Largest diagonal entry of the unweighted Laplacian `E Eᵀ`, i.e. the
    /// maximum degree.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.num_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Oriented incidence matrix `E`, `|V| × |E|`, entries in `{-1, 0, +1}`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.num_nodes, self.edges.len());
        for (col, &(head, tail)) in self.edges.iter().enumerate() {
            e[(head, col)] = 1.0;
            e[(tail, col)] = -1.0;
        }
        e
    }

    /// `E_l v`: maps an edge-stacked vector (`|E|·n`) to a node-stacked
    /// vector (`|V|·n`) without materializing the Kronecker product.
    pub fn apply_el(&self, v: &DVector<f64>, block_dim: usize) -> Result<DVector<f64>> {
        expect_len(v, self.num_edges() * block_dim, "E_l input")?;
        let mut out = DVector::zeros(self.num_nodes * block_dim);
        for (e, &(head, tail)) in self.edges.iter().enumerate() {
            let w = self.l[e].sqrt();
            for d in 0..block_dim {
                let val = w * v[e * block_dim + d];
                out[head * block_dim + d] += val;
                out[tail * block_dim + d] -= val;
            }
        }
        Ok(out)
    }

    /// `E_lᵀ x`: maps a node-stacked vector (`|V|·n`) to edge differences
    /// scaled by `sqrt(l)` (`|E|·n`). Zero on consensus vectors.
    pub fn apply_el_t(&self, x: &DVector<f64>, block_dim: usize) -> Result<DVector<f64>> {
        expect_len(x, self.num_nodes * block_dim, "E_lᵀ input")?;
        let mut out = DVector::zeros(self.num_edges() * block_dim);
        for (e, &(head, tail)) in self.edges.iter().enumerate() {
            let w = self.l[e].sqrt();
            for d in 0..block_dim {
                out[e * block_dim + d] = w * (x[head * block_dim + d] - x[tail * block_dim + d]);
            }
        }
        Ok(out)
    }

    /// `L_r x`: block `i` receives `Σ_{j ∈ N(i)} r_{ij} (x_i − x_j)`.
    pub fn apply_lr(&self, x: &DVector<f64>, block_dim: usize) -> Result<DVector<f64>> {
        expect_len(x, self.num_nodes * block_dim, "L_r input")?;
        let mut out = DVector::zeros(self.num_nodes * block_dim);
        for (e, &(head, tail)) in self.edges.iter().enumerate() {
            let w = self.r[e];
            for d in 0..block_dim {
                let diff = w * (x[head * block_dim + d] - x[tail * block_dim + d]);
                out[head * block_dim + d] += diff;
                out[tail * block_dim + d] -= diff;
            }
        }
        Ok(out)
    }

    /// Assembles the dense `|V| × |V|` matrix `E diag(w) Eᵀ` for the given
    /// per-edge weights.
    pub fn node_laplacian(&self, weights: &[f64]) -> DMatrix<f64> {
        assert_eq!(weights.len(), self.num_edges(), "one weight per edge");
        let mut m = DMatrix::zeros(self.num_nodes, self.num_nodes);
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            let w = weights[e];
            m[(a, a)] += w;
            m[(b, b)] += w;
            m[(a, b)] -= w;
            m[(b, a)] -= w;
        }
        m
    }

    /// Eigenvalues of a dense symmetric matrix, ascending.
    fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
        if m.nrows() == 0 {
            return Ok(Vec::new());
        }
        let eig = nalgebra::SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or_else(
            || {
                Error::EigenFailure(format!(
                    "symmetric eigensolver did not converge on a {}x{} matrix",
                    m.nrows(),
                    m.ncols()
                ))
            },
        )?;
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.total_cmp(b));
        Ok(vals)
    }

    /// Largest eigenvalue of `E diag(r) Eᵀ` (equals the largest eigenvalue
    /// of the Kronecker-lifted `L_r`) together with `1/γ = min_e r_e/l_e`.
    pub fn spectral_constants(&self, beta: f64) -> Result<SpectralConstants> {
        if beta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "smoothness constant must be nonnegative, got {beta}"
            )));
        }
        let lambda = if self.edges.is_empty() {
            0.0
        } else {
            let vals = Self::symmetric_eigenvalues(&self.node_laplacian(&self.r))?;
            *vals.last().expect("non-empty spectrum")
        };
        let inv_gamma = self
            .r
            .iter()
            .zip(&self.l)
            .map(|(&re, &le)| re / le)
            .fold(f64::INFINITY, f64::min);
        Ok(SpectralConstants {
            lambda,
            inv_gamma,
            beta,
        })
    }

    /// Checks `L_r − α L_l ⪰ 0` by assembling `E diag(r − α l) Eᵀ` and
    /// inspecting its minimum eigenvalue. Returns the verdict (true iff the
    /// minimum eigenvalue is ≥ −[`PSD_TOL`]) together with that eigenvalue.
    ///
    /// Requires `alpha > 0`.
    pub fn is_psd_damping(&self, alpha: f64) -> Result<(bool, f64)> {
        if alpha <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "damping check requires alpha > 0, got {alpha}"
            )));
        }
        if self.edges.is_empty() {
            return Ok((true, 0.0));
        }
        let weights: Vec<f64> = self
            .r
            .iter()
            .zip(&self.l)
            .map(|(&re, &le)| re - alpha * le)
            .collect();
        let vals = Self::symmetric_eigenvalues(&self.node_laplacian(&weights))?;
        let min = vals[0];
        Ok((min >= -PSD_TOL, min))
    }

    /// Minimum-norm solution of `E_l u = y` (per block), via the
    /// pseudo-inverse of `L_l = E diag(l) Eᵀ`:
    /// `u = diag(sqrt(l)) Eᵀ L_l⁺ y`.
    ///
    /// `y` must lie in the range of `E_l` for the result to be exact; the
    /// caller can measure the residual with [`Self::apply_el`].
    pub fn min_norm_edge_solve(&self, y: &DVector<f64>, block_dim: usize) -> Result<DVector<f64>> {
        expect_len(y, self.num_nodes * block_dim, "min-norm solve input")?;
        if self.edges.is_empty() {
            return Ok(DVector::zeros(0));
        }
        let ll = self.node_laplacian(&self.l);
        let eig = nalgebra::SymmetricEigen::try_new(ll, f64::EPSILON, 0)
            .ok_or_else(|| Error::EigenFailure("L_l eigendecomposition failed".into()))?;
        let max_val = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b));
        let cutoff = max_val * NULLSPACE_REL_TOL;
        // z = L_l⁺ y, applied per coordinate block.
        let mut z = DVector::zeros(self.num_nodes * block_dim);
        for d in 0..block_dim {
            let yd = DVector::from_fn(self.num_nodes, |i, _| y[i * block_dim + d]);
            let coeffs = eig.eigenvectors.transpose() * &yd;
            let mut zd = DVector::zeros(self.num_nodes);
            for (k, &val) in eig.eigenvalues.iter().enumerate() {
                if val > cutoff {
                    zd += eig.eigenvectors.column(k) * (coeffs[k] / val);
                }
            }
            for i in 0..self.num_nodes {
                z[i * block_dim + d] = zd[i];
            }
        }
        // u = diag(sqrt(l)) Eᵀ z, blockwise.
        let mut u = DVector::zeros(self.num_edges() * block_dim);
        for (e, &(head, tail)) in self.edges.iter().enumerate() {
            let w = self.l[e].sqrt();
            for d in 0..block_dim {
                u[e * block_dim + d] = w * (z[head * block_dim + d] - z[tail * block_dim + d]);
            }
        }
        Ok(u)
    }
}

fn check_weights(name: &'static str, w: &[f64], num_edges: usize) -> Result<()> {
    if w.len() != num_edges {
        return Err(Error::WeightLength {
            name,
            expected: num_edges,
            got: w.len(),
        });
    }
    for (index, &value) in w.iter().enumerate() {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::NonPositiveWeight { name, index, value });
        }
    }
    Ok(())
}

fn expect_len(v: &DVector<f64>, expected: usize, context: &'static str) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: v.len(),
            context,
        });
    }
    Ok(())
}

/// Constants entering step-size caps: `lambda` is the largest eigenvalue of
/// `L_r`, `inv_gamma = 1/γ = max{α | α l ≤ r} = min_e r_e/l_e`, and `beta`
/// is the smoothness constant of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstants {
    pub lambda: f64,
    pub inv_gamma: f64,
    pub beta: f64,
}

/// Samples an Erdős–Rényi graph with unit weights, resampling (up to a
/// bounded retry budget) until connected. Deterministic given the seed.
pub fn random_graph(num_nodes: usize, edge_prob: f64, seed: u64) -> Result<WeightedGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_graph_with(num_nodes, edge_prob, &mut rng)
}

/// As [`random_graph`] but drawing from a caller-supplied generator.
pub fn random_graph_with<R: Rng>(
    num_nodes: usize,
    edge_prob: f64,
    rng: &mut R,
) -> Result<WeightedGraph> {
    if !edge_prob.is_finite() || edge_prob <= 0.0 || edge_prob > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "edge probability must lie in (0, 1], got {edge_prob}"
        )));
    }
    for _ in 0..CONNECTIVITY_RETRIES {
        let mut edges = Vec::new();
        for i in 0..num_nodes {
            for j in (i + 1)..num_nodes {
                if rng.gen::<f64>() < edge_prob {
                    edges.push((i, j));
                }
            }
        }
        let m = edges.len();
        match WeightedGraph::new(num_nodes, edges, vec![1.0; m], vec![1.0; m]) {
            Ok(g) => return Ok(g),
            Err(Error::Disconnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::ConnectivityRetriesExhausted {
        attempts: CONNECTIVITY_RETRIES,
        num_nodes,
        edge_prob,
    })
}
