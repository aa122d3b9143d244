//! Shared fixtures and independent brute-force oracles for the acceptance
//! suite. The oracles deliberately avoid the closed forms they check:
//! mirror steps are minimized by grid refinement / golden-section search
//! over the feasible set.

use nalgebra::{DMatrix, DVector};
use rlcmd_core::graph::WeightedGraph;
use rlcmd_core::mirror::MirrorMap;
use rlcmd_core::problem::{ProblemInstance, QuadraticObjective};

/// Two scalar nodes pulling toward +1 and −1 over one unit-weight edge.
/// Hand-derived KKT pair: x₀* = 0, u* = 1.
pub fn two_node_instance() -> ProblemInstance {
    let graph = WeightedGraph::new(2, vec![(0, 1)], vec![1.0], vec![1.0]).unwrap();
    let f1 = QuadraticObjective::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, 1.0),
    )
    .unwrap();
    let f2 = QuadraticObjective::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, -1.0),
    )
    .unwrap();
    ProblemInstance::new(graph, vec![f1, f2], 0.0, MirrorMap::euclidean(1).unwrap()).unwrap()
}

/// Golden-section minimizer of a convex scalar function on `[lo, hi]`.
pub fn golden_min(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
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
}

/// Brute-force minimizer of the mirror-step objective
/// `α⟨w, x⟩ + B_ψ(x, x_k)` over the simplex, by grid search with nested
/// refinement (no multiplicative-update structure used). Supports n = 2, 3.
pub fn brute_force_entropy_step(
    map: &MirrorMap,
    x_k: &DVector<f64>,
    w: &DVector<f64>,
    alpha: f64,
) -> DVector<f64> {
    let n = x_k.len();
    let objective = |cand: &DVector<f64>| -> f64 {
        alpha * w.dot(cand) + map.bregman(cand, x_k).unwrap()
    };
    match n {
        2 => {
            let t = golden_min(0.0, 1.0, |t| {
                objective(&DVector::from_vec(vec![t, 1.0 - t]))
            });
            DVector::from_vec(vec![t, 1.0 - t])
        }
        3 => {
            // Coordinates (t1, t2) with t3 = 1 − t1 − t2; shrink the search
            // window tenfold per round around the incumbent.
            let mut center = (x_k[0], x_k[1]);
            let mut radius = 1.0;
            let grid = 40;
            let mut best = (f64::INFINITY, center);
            for _ in 0..8 {
                for i in 0..=grid {
                    for j in 0..=grid {
                        let t1 = center.0 - radius + 2.0 * radius * i as f64 / grid as f64;
                        let t2 = center.1 - radius + 2.0 * radius * j as f64 / grid as f64;
                        if t1 < 0.0 || t2 < 0.0 || t1 + t2 > 1.0 {
                            continue;
                        }
                        let cand = DVector::from_vec(vec![t1, t2, 1.0 - t1 - t2]);
                        let val = objective(&cand);
                        if val < best.0 {
                            best = (val, (t1, t2));
                        }
                    }
                }
                center = best.1;
                radius /= 10.0;
            }
            DVector::from_vec(vec![center.0, center.1, 1.0 - center.0 - center.1])
        }
        _ => panic!("oracle supports n in {{2, 3}}"),
    }
}

/// Brute-force minimizer of the composite objective
/// `α⟨w, x⟩ + αθ‖x‖₁ + ½‖x − x_k‖²`, coordinatewise golden section
/// (separability of the objective is a property of the problem, not of the
/// shrinkage formula under test).
pub fn brute_force_composite_step(
    x_k: &DVector<f64>,
    w: &DVector<f64>,
    alpha: f64,
    theta: f64,
) -> DVector<f64> {
    DVector::from_fn(x_k.len(), |j, _| {
        let center = x_k[j] - alpha * w[j];
        golden_min(
            center - alpha * theta - 1.0,
            center + alpha * theta + 1.0,
            |t| alpha * w[j] * t + alpha * theta * t.abs() + 0.5 * (t - x_k[j]).powi(2),
        )
    })
}

/// Interior simplex sample with entries bounded away from zero.
pub fn random_simplex_block<R: rand::Rng>(n: usize, rng: &mut R) -> DVector<f64> {
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

pub fn random_stacked_simplex<R: rand::Rng>(
    blocks: usize,
    n: usize,
    rng: &mut R,
) -> DVector<f64> {
    let mut out = DVector::zeros(blocks * n);
    for b in 0..blocks {
        out.rows_mut(b * n, n)
            .copy_from(&random_simplex_block(n, rng));
    }
    out
}
