//! Mirror maps, Bregman divergences, and the closed-form mirror / proximal
//! update steps shared by every solver.
//!
//! Two configurations are supported, matching the two experimental setups:
//!
//! - `euclidean`: ψ₀ = ½‖·‖₂² on all of ℝⁿ. The mirror step is a plain
//!   gradient step; the composite step is soft-thresholding.
//! - `entropy`: ψ₀(v) = ⟨v, ln v⟩ on the probability simplex. The mirror
//!   step is the exponentiated (multiplicative) update, renormalized per
//!   block.
//!
//! All operations act blockwise on stacked vectors: a point `x ∈ ℝ^{N·n}`
//! is `N` blocks of dimension `n`, and `ψ(x) = Σ_i ψ₀(x_i)`.
//!
//! Both maps are 1-strongly convex on their domains, so
//! `B_ψ(x′, x) ≥ ½‖x′ − x‖₂²` (for entropy this is a Pinsker-type bound);
//! [`MirrorMap::strong_convexity_probe`] checks this on sampled points.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the per-block sum when validating simplex membership.
const SIMPLEX_SUM_TOL: f64 = 1e-9;

/// Floor on exponent arguments in the multiplicative update. Keeps iterate
/// entries strictly positive (no denormal/zero underflow) while staying
/// mathematically invisible: affected entries are below 1e-300 relative.
const EXP_FLOOR: f64 = -700.0;

/// Which mirror map (and with it, which feasible set) is in effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorKind {
    Euclidean,
    Entropy,
}

/// Descriptor of the per-node feasible set X₀.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// All of ℝⁿ.
    Reals,
    /// The probability simplex in ℝⁿ.
    Simplex,
}

/// A mirror map ψ₀ together with its per-node block dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MirrorMap {
    kind: MirrorKind,
    block_dim: usize,
}

impl MirrorMap {
    pub fn new(kind: MirrorKind, block_dim: usize) -> Result<Self> {
        if block_dim == 0 {
            return Err(Error::InvalidArgument(
                "mirror map block dimension must be positive".into(),
            ));
        }
        Ok(MirrorMap { kind, block_dim })
    }

    pub fn euclidean(block_dim: usize) -> Result<Self> {
        Self::new(MirrorKind::Euclidean, block_dim)
    }

    pub fn entropy(block_dim: usize) -> Result<Self> {
        Self::new(MirrorKind::Entropy, block_dim)
    }

    pub fn kind(&self) -> MirrorKind {
        self.kind
    }

    pub fn block_dim(&self) -> usize {
        self.block_dim
    }

    /// The feasible set X₀ tied to this map: ℝⁿ for euclidean, the
    /// probability simplex for entropy.
    pub fn domain(&self) -> Domain {
        match self.kind {
            MirrorKind::Euclidean => Domain::Reals,
            MirrorKind::Entropy => Domain::Simplex,
        }
    }

    /// Feasible starting point: the uniform distribution per block for
    /// entropy, the origin for euclidean.
    pub fn initial_point(&self, num_blocks: usize) -> DVector<f64> {
        match self.kind {
            MirrorKind::Euclidean => DVector::zeros(num_blocks * self.block_dim),
            MirrorKind::Entropy => DVector::from_element(
                num_blocks * self.block_dim,
                1.0 / self.block_dim as f64,
            ),
        }
    }

    fn num_blocks(&self, x: &DVector<f64>, context: &'static str) -> Result<usize> {
        if !x.len().is_multiple_of(self.block_dim) {
            return Err(Error::DimensionMismatch {
                expected: self.block_dim,
                got: x.len(),
                context,
            });
        }
        Ok(x.len() / self.block_dim)
    }

    /// Validates domain membership of every block. With `interior` set,
    /// entropy additionally requires strictly positive entries.
    pub fn check_domain(&self, x: &DVector<f64>, interior: bool) -> Result<()> {
        let blocks = self.num_blocks(x, "domain check")?;
        match self.kind {
            MirrorKind::Euclidean => {
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::OutOfDomain("non-finite entry".into()));
                }
            }
            MirrorKind::Entropy => {
                let n = self.block_dim;
                for b in 0..blocks {
                    let mut sum = 0.0;
                    for j in 0..n {
                        let v = x[b * n + j];
                        if !v.is_finite() || v < 0.0 {
                            return Err(Error::OutOfDomain(format!(
                                "block {b} entry {j} = {v} is negative or non-finite"
                            )));
                        }
                        if interior && v == 0.0 {
                            return Err(Error::OutOfDomain(format!(
                                "block {b} entry {j} lies on the simplex boundary; \
                                 an interior point is required"
                            )));
                        }
                        sum += v;
                    }
                    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
                        return Err(Error::OutOfDomain(format!(
                            "block {b} sums to {sum}, not 1"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// ψ(x) = Σ_i ψ₀(x_i), with 0·ln 0 := 0 on the simplex boundary.
    pub fn psi(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            MirrorKind::Euclidean => 0.5 * x.norm_squared(),
            MirrorKind::Entropy => x
                .iter()
                .map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 })
                .sum(),
        }
    }

    /// ∇ψ(x). For entropy this is `ln x + 1` elementwise and requires an
    /// interior point.
    pub fn grad_psi(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self.kind {
            MirrorKind::Euclidean => Ok(x.clone()),
            MirrorKind::Entropy => {
                self.check_domain(x, true)?;
                Ok(x.map(|v| v.ln() + 1.0))
            }
        }
    }

    /// Bregman divergence `B_ψ(x′, x) = ψ(x′) − ψ(x) − ⟨∇ψ(x), x′ − x⟩`,
    /// computed blockwise and summed over nodes.
    ///
    /// `x` must be interior for the entropy map; `x′` may touch the
    /// boundary (0·ln 0 := 0).
    pub fn bregman(&self, x_prime: &DVector<f64>, x: &DVector<f64>) -> Result<f64> {
        if x_prime.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: x_prime.len(),
                context: "bregman",
            });
        }
        self.check_domain(x_prime, false)?;
        self.check_domain(x, true)?;
        match self.kind {
            MirrorKind::Euclidean => {
                let d = x_prime - x;
                Ok(0.5 * d.norm_squared())
            }
            MirrorKind::Entropy => {
                // Σ_j x′_j ln(x′_j/x_j) + (x_j − x′_j); the linear terms
                // cancel only up to SIMPLEX_SUM_TOL, so keep them.
                let mut total = 0.0;
                for (xp, xv) in x_prime.iter().zip(x.iter()) {
                    if *xp > 0.0 {
                        total += xp * (xp.ln() - xv.ln());
                    }
                    total += xv - xp;
                }
                Ok(total)
            }
        }
    }

    /// Residual of the three-point identity
    /// `B(x′,x) − B(x′,x⁺) − B(x⁺,x) = ⟨∇ψ(x⁺) − ∇ψ(x), x′ − x⁺⟩`.
    ///
    /// An exact identity; the returned value is pure floating-point noise
    /// and is asserted ≤ 1e−10 in the verification suites.
    pub fn three_point_residual(
        &self,
        x: &DVector<f64>,
        x_prime: &DVector<f64>,
        x_plus: &DVector<f64>,
    ) -> Result<f64> {
        let lhs = self.bregman(x_prime, x)? - self.bregman(x_prime, x_plus)?
            - self.bregman(x_plus, x)?;
        let rhs = (self.grad_psi(x_plus)? - self.grad_psi(x)?).dot(&(x_prime - x_plus));
        Ok(lhs - rhs)
    }

    /// The mirror step `argmin_{x ∈ X} α⟨w, x⟩ + B_ψ(x, x_k)`, blockwise:
    ///
    /// - euclidean: `x_k − α w` (unconstrained);
    /// - entropy: `x⁺_i ∝ x_i ⊙ exp(−α w_i)`, renormalized to the simplex.
    ///   The exponent is stabilized by per-block max subtraction, a no-op
    ///   under normalization.
    pub fn mirror_step(
        &self,
        x_k: &DVector<f64>,
        w: &DVector<f64>,
        alpha: f64,
    ) -> Result<DVector<f64>> {
        if alpha <= 0.0 || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mirror step requires alpha > 0, got {alpha}"
            )));
        }
        if w.len() != x_k.len() {
            return Err(Error::DimensionMismatch {
                expected: x_k.len(),
                got: w.len(),
                context: "mirror step direction",
            });
        }
        match self.kind {
            MirrorKind::Euclidean => Ok(x_k - w * alpha),
            MirrorKind::Entropy => {
                self.check_domain(x_k, true)?;
                let blocks = self.num_blocks(x_k, "mirror step")?;
                let n = self.block_dim;
                let mut out = DVector::zeros(x_k.len());
                for b in 0..blocks {
                    let mut t = vec![0.0; n];
                    let mut t_max = f64::NEG_INFINITY;
                    for (j, tj) in t.iter_mut().enumerate() {
                        let idx = b * n + j;
                        *tj = x_k[idx].ln() - alpha * w[idx];
                        t_max = t_max.max(*tj);
                    }
                    let mut sum = 0.0;
                    for (j, tj) in t.iter().enumerate() {
                        let z = ((tj - t_max).max(EXP_FLOOR)).exp();
                        out[b * n + j] = z;
                        sum += z;
                    }
                    for j in 0..n {
                        out[b * n + j] /= sum;
                    }
                }
                Ok(out)
            }
        }
    }

    /// The composite step `argmin_x α⟨w, x⟩ + α θ ‖x‖₁ + B_ψ(x, x_k)`,
    /// which for the euclidean map is soft-thresholding:
    /// `S_{αθ}(x_k − α w)` with `[S_a(x)]_j = sign(x_j)·max{0, |x_j| − a}`.
    ///
    /// Only defined for the euclidean map on ℝⁿ; the entropy/composite
    /// combination has no closed form and is rejected.
    pub fn composite_mirror_step(
        &self,
        x_k: &DVector<f64>,
        w: &DVector<f64>,
        alpha: f64,
        theta: f64,
    ) -> Result<DVector<f64>> {
        if self.kind != MirrorKind::Euclidean {
            return Err(Error::UnsupportedConfiguration(
                "composite mirror step is only defined for the euclidean map on ℝⁿ".into(),
            ));
        }
        if theta < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ℓ1 weight must be nonnegative, got {theta}"
            )));
        }
        let step = self.mirror_step(x_k, w, alpha)?;
        Ok(soft_threshold(&step, alpha * theta))
    }

    /// Checks the 1-strong-convexity lower bound
    /// `B_ψ(x′, x) ≥ ½‖x′ − x‖₂² − 1e−10` on a sampled pair.
    pub fn strong_convexity_probe(
        &self,
        x: &DVector<f64>,
        x_prime: &DVector<f64>,
    ) -> Result<bool> {
        let b = self.bregman(x_prime, x)?;
        let half_sq = 0.5 * (x_prime - x).norm_squared();
        Ok(b >= half_sq - 1e-10)
    }
}

/// Elementwise shrinkage (soft-thresholding) operator
/// `[S_a(x)]_j = sign(x_j)·max{0, |x_j| − a}`.
pub fn soft_threshold(x: &DVector<f64>, a: f64) -> DVector<f64> {
    x.map(|v| v.signum() * (v.abs() - a).max(0.0))
}

/// A subgradient of `‖·‖₁`: the sign vector with the zero-coordinate
/// subgradient taken as 0.
pub fn l1_subgradient(x: &DVector<f64>) -> DVector<f64> {
    x.map(|v| if v == 0.0 { 0.0 } else { v.signum() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex_block<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
        // Exponentials normalize to an interior simplex point; mixing with
        // the uniform point keeps entries comfortably away from zero so the
        // identity checks are not dominated by ln() cancellation.
        let raw: Vec<f64> = (0..n).map(|_| -(rng.gen::<f64>().max(1e-12)).ln()).collect();
        let sum: f64 = raw.iter().sum();
        raw.into_iter()
            .map(|v| 0.9 * v / sum + 0.1 / n as f64)
            .collect()
    }

    fn random_simplex<R: Rng>(blocks: usize, n: usize, rng: &mut R) -> DVector<f64> {
        let mut v = Vec::with_capacity(blocks * n);
        for _ in 0..blocks {
            v.extend(random_simplex_block(n, rng));
        }
        DVector::from_vec(v)
    }

    #[test]
    fn bregman_is_zero_at_equal_points() {
        let map = MirrorMap::entropy(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_simplex(2, 3, &mut rng);
        assert_abs_diff_eq!(map.bregman(&x, &x).unwrap(), 0.0, epsilon = 1e-15);

        let map = MirrorMap::euclidean(3).unwrap();
        let y = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(map.bregman(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn euclidean_bregman_is_half_squared_distance() {
        let map = MirrorMap::euclidean(2).unwrap();
        let x = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.0]);
        let y = DVector::from_vec(vec![0.0, 1.0, 1.0, 3.0]);
        assert_abs_diff_eq!(
            map.bregman(&x, &y).unwrap(),
            0.5 * (&x - &y).norm_squared(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn entropy_bregman_kl_hand_value() {
        // KL((1,0) ‖ (1/2,1/2)) = ln 2, with 0·ln 0 := 0 on the boundary.
        let map = MirrorMap::entropy(2).unwrap();
        let x_prime = DVector::from_vec(vec![1.0, 0.0]);
        let x = DVector::from_vec(vec![0.5, 0.5]);
        assert_abs_diff_eq!(
            map.bregman(&x_prime, &x).unwrap(),
            2.0_f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn entropy_bregman_rejects_boundary_second_argument() {
        let map = MirrorMap::entropy(2).unwrap();
        let x_prime = DVector::from_vec(vec![0.5, 0.5]);
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            map.bregman(&x_prime, &x),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn bregman_nonnegative_and_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let map = MirrorMap::entropy(4).unwrap();
        for _ in 0..200 {
            let a = random_simplex(3, 4, &mut rng);
            let b = random_simplex(3, 4, &mut rng);
            let div = map.bregman(&a, &b).unwrap();
            assert!(div >= 0.0);
            if (&a - &b).norm() > 1e-6 {
                assert!(div > 0.0);
            }
        }
    }

    #[test]
    fn three_point_identity_is_exact_at_coincident_points() {
        let map = MirrorMap::entropy(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_simplex(2, 3, &mut rng);
        let x_prime = random_simplex(2, 3, &mut rng);
        let res = map.three_point_residual(&x, &x_prime, &x).unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn three_point_residual_is_noise_for_both_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ent = MirrorMap::entropy(5).unwrap();
        let euc = MirrorMap::euclidean(5).unwrap();
        for _ in 0..500 {
            let x = random_simplex(2, 5, &mut rng);
            let xp = random_simplex(2, 5, &mut rng);
            let xplus = random_simplex(2, 5, &mut rng);
            assert!(ent.three_point_residual(&x, &xp, &xplus).unwrap().abs() <= 1e-10);

            let y = DVector::from_fn(10, |_, _| 4.0 * rng.gen::<f64>() - 2.0);
            let yp = DVector::from_fn(10, |_, _| 4.0 * rng.gen::<f64>() - 2.0);
            let yplus = DVector::from_fn(10, |_, _| 4.0 * rng.gen::<f64>() - 2.0);
            assert!(euc.three_point_residual(&y, &yp, &yplus).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn mirror_step_with_zero_direction_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = MirrorMap::entropy(4).unwrap();
        let x = random_simplex(2, 4, &mut rng);
        let w = DVector::zeros(8);
        let out = map.mirror_step(&x, &w, 0.7).unwrap();
        assert!((out - &x).norm() < 1e-14);
    }

    #[test]
    fn entropy_step_ignores_constant_block_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let map = MirrorMap::entropy(3).unwrap();
        let x = random_simplex(2, 3, &mut rng);
        let w = DVector::from_vec(vec![5.0, 5.0, 5.0, -2.0, -2.0, -2.0]);
        let out = map.mirror_step(&x, &w, 0.3).unwrap();
        assert!((out - &x).norm() < 1e-13);
    }

    #[test]
    fn entropy_step_hand_value() {
        // x = (1/2, 1/2), α·w = (ln 2, 0): multiplicative weights give
        // (1/4, 1/2) before normalization, i.e. (1/3, 2/3).
        let map = MirrorMap::entropy(2).unwrap();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        let w = DVector::from_vec(vec![2.0_f64.ln(), 0.0]);
        let out = map.mirror_step(&x, &w, 1.0).unwrap();
        assert_abs_diff_eq!(out[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(out[1], 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn entropy_step_matches_golden_section_oracle() {
        // n = 2 lets us minimize α⟨w,x⟩ + B(x, x_k) over x = (t, 1-t) by
        // golden-section search, independently of the multiplicative form.
        let map = MirrorMap::entropy(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_simplex(1, 2, &mut rng);
            let w = DVector::from_fn(2, |_, _| 4.0 * rng.gen::<f64>() - 2.0);
            let alpha = 0.1 + rng.gen::<f64>();
            let objective = |t: f64| -> f64 {
                let cand = DVector::from_vec(vec![t, 1.0 - t]);
                alpha * w.dot(&cand) + map.bregman(&cand, &x).unwrap()
            };
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
            while hi - lo > 1e-12 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if objective(m1) <= objective(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let t_star = 0.5 * (lo + hi);
            let out = map.mirror_step(&x, &w, alpha).unwrap();
            assert_abs_diff_eq!(out[0], t_star, epsilon = 1e-6);
        }
    }

    #[test]
    fn entropy_step_output_is_interior_and_normalized() {
        let map = MirrorMap::entropy(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x = random_simplex(3, 6, &mut rng);
            let w = DVector::from_fn(18, |_, _| 40.0 * (rng.gen::<f64>() - 0.5));
            let out = map.mirror_step(&x, &w, 0.5).unwrap();
            assert!(out.iter().all(|&v| v > 0.0));
            for b in 0..3 {
                let sum: f64 = (0..6).map(|j| out[b * 6 + j]).sum();
                assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn entropy_step_survives_extreme_directions() {
        // Exponent clipping: huge w magnitudes must not overflow or produce
        // zeros/NaNs.
        let map = MirrorMap::entropy(3).unwrap();
        let x = DVector::from_vec(vec![1.0 / 3.0; 3]);
        let w = DVector::from_vec(vec![1e6, -1e6, 0.0]);
        let out = map.mirror_step(&x, &w, 1.0).unwrap();
        assert!(out.iter().all(|&v| v.is_finite() && v > 0.0));
        let sum: f64 = out.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn mirror_step_variational_inequality() {
        // Optimality characterization: ⟨αw + ∇ψ(x⁺) − ∇ψ(x_k), x − x⁺⟩ ≥ 0
        // for feasible x, up to numerical slack.
        let map = MirrorMap::entropy(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let xk = random_simplex(1, 4, &mut rng);
            let w = DVector::from_fn(4, |_, _| 6.0 * (rng.gen::<f64>() - 0.5));
            let alpha = 0.2 + rng.gen::<f64>();
            let xp = map.mirror_step(&xk, &w, alpha).unwrap();
            let grad_term = &w * alpha + map.grad_psi(&xp).unwrap() - map.grad_psi(&xk).unwrap();
            for _ in 0..20 {
                let cand = random_simplex(1, 4, &mut rng);
                let vi = grad_term.dot(&(cand - &xp));
                assert!(vi >= -1e-8, "variational inequality violated: {vi}");
            }
        }
    }

    #[test]
    fn composite_step_with_zero_weight_equals_mirror_step() {
        let map = MirrorMap::euclidean(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = DVector::from_fn(6, |_, _| rng.gen::<f64>() - 0.5);
        let w = DVector::from_fn(6, |_, _| rng.gen::<f64>() - 0.5);
        let a = map.composite_mirror_step(&x, &w, 0.4, 0.0).unwrap();
        let b = map.mirror_step(&x, &w, 0.4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shrinkage_scalar_cases() {
        // x_k − αw = 1.2 with αθ = 0.5 shrinks to 0.7; −0.3 collapses to 0.
        let map = MirrorMap::euclidean(1).unwrap();
        let x = DVector::from_vec(vec![1.2]);
        let w = DVector::from_vec(vec![0.0]);
        let out = map.composite_mirror_step(&x, &w, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(out[0], 0.7, epsilon = 1e-15);

        let x = DVector::from_vec(vec![-0.3]);
        let out = map.composite_mirror_step(&x, &w, 1.0, 0.5).unwrap();
        assert_eq!(out[0], 0.0);

        let x = DVector::from_vec(vec![0.0]);
        let out = map.composite_mirror_step(&x, &w, 1.0, 0.5).unwrap();
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn composite_step_matches_golden_section_oracle() {
        // Coordinate-separable objective: αw t + αθ|t| + ½(t − x_k)².
        let map = MirrorMap::euclidean(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let phi = (5.0_f64.sqrt() - 1.0) / 2.0;
        for _ in 0..100 {
            let xk = 4.0 * (rng.gen::<f64>() - 0.5);
            let w = 4.0 * (rng.gen::<f64>() - 0.5);
            let alpha = 0.1 + rng.gen::<f64>();
            let theta = rng.gen::<f64>();
            let objective =
                |t: f64| alpha * w * t + alpha * theta * t.abs() + 0.5 * (t - xk).powi(2);
            let center = xk - alpha * w;
            let (mut lo, mut hi) = (center - alpha * theta - 1.0, center + alpha * theta + 1.0);
            while hi - lo > 1e-12 {
                let m1 = hi - phi * (hi - lo);
                let m2 = lo + phi * (hi - lo);
                if objective(m1) <= objective(m2) {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            let t_star = 0.5 * (lo + hi);
            let out = map
                .composite_mirror_step(
                    &DVector::from_vec(vec![xk]),
                    &DVector::from_vec(vec![w]),
                    alpha,
                    theta,
                )
                .unwrap();
            assert_abs_diff_eq!(out[0], t_star, epsilon = 1e-6);
        }
    }

    #[test]
    fn composite_step_rejects_entropy_kind() {
        let map = MirrorMap::entropy(2).unwrap();
        let x = DVector::from_vec(vec![0.5, 0.5]);
        let w = DVector::zeros(2);
        assert!(matches!(
            map.composite_mirror_step(&x, &w, 0.1, 0.1),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }

    #[test]
    fn strong_convexity_probe_holds() {
        let euc = MirrorMap::euclidean(3).unwrap();
        let ent = MirrorMap::entropy(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let x = random_simplex(1, 5, &mut rng);
            let xp = random_simplex(1, 5, &mut rng);
            assert!(ent.strong_convexity_probe(&x, &xp).unwrap());
        }
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let yp = DVector::from_vec(vec![-1.0, 0.0, 4.0]);
        assert!(euc.strong_convexity_probe(&y, &yp).unwrap());
        assert!(euc.strong_convexity_probe(&y, &y).unwrap());
    }

    #[test]
    fn domain_check_rejects_bad_simplex_points() {
        let map = MirrorMap::entropy(2).unwrap();
        let negative = DVector::from_vec(vec![-0.1, 1.1]);
        assert!(map.check_domain(&negative, false).is_err());
        let bad_sum = DVector::from_vec(vec![0.7, 0.7]);
        assert!(map.check_domain(&bad_sum, false).is_err());
        let boundary = DVector::from_vec(vec![1.0, 0.0]);
        assert!(map.check_domain(&boundary, false).is_ok());
        assert!(map.check_domain(&boundary, true).is_err());
    }

    #[test]
    fn initial_points_are_feasible() {
        let ent = MirrorMap::entropy(4).unwrap();
        let x = ent.initial_point(3);
        ent.check_domain(&x, true).unwrap();
        let euc = MirrorMap::euclidean(4).unwrap();
        assert_eq!(euc.initial_point(3), DVector::zeros(12));
    }
}
