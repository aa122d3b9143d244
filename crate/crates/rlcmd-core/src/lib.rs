//! Distributed mirror descent over undirected graphs via damped primal-dual
//! (RLC-type) dynamics.
//!
//! The library is organized around the pipeline
//! `graph` → `mirror` → `problem` → `solvers` → `metrics`:
//!
//! - [`graph`]: weighted graphs, incidence/Laplacian operators, spectral
//!   constants that cap step sizes.
//! - [`mirror`]: mirror maps (euclidean, entropy), Bregman divergences, and
//!   the closed-form mirror / proximal update steps.
//! - [`problem`]: per-node quadratic objectives, instance generation, and the
//!   high-accuracy KKT reference solution used by all metrics.
//! - [`solvers`]: the damped primal-dual iteration and its composite variant,
//!   plus mirror-prox and distributed mirror descent baselines.
//! - [`metrics`]: Lagrangian, duality gap, energy function, and the
//!   runtime-checkable convergence inequalities.

pub mod graph;
pub mod metrics;
pub mod mirror;
pub mod problem;
pub mod solvers;

mod error;

pub use error::{Error, Result};
