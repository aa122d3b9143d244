//! Experiment configuration: JSON with every field optional, defaulting to
//! the reference experimental setup (30 nodes, n = 30, edge probability
//! 0.3, r = 0.1·𝟙, l = (β+λ)·r, smooth simplex problem, 2000 iterations).
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rlcmd_core::mirror::MirrorKind;
use rlcmd_core::problem::{generate_instance, InstanceParams, LRule};
use rlcmd_core::solvers::{Algorithm, StepSchedule};

use crate::HarnessError;

/// Step-size policy as configured; `alpha0 = null` means "largest valid"
/// for constant schedules and 1.0 for the others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum ScheduleConfig {
    Constant {
        #[serde(default)]
        alpha0: Option<f64>,
    },
    OneOverSqrtK {
        #[serde(default)]
        alpha0: Option<f64>,
    },
    FixedHorizon {
        #[serde(default)]
        alpha0: Option<f64>,
        #[serde(default)]
        horizon: Option<usize>,
    },
}

impl ScheduleConfig {
    fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Dmd => ScheduleConfig::OneOverSqrtK { alpha0: None },
            _ => ScheduleConfig::Constant { alpha0: None },
        }
    }

    /// Builds the concrete schedule for one run; constant schedules are
    /// validated against the per-algorithm cap on this instance.
    pub fn resolve(
        &self,
        algorithm: Algorithm,
        instance: &rlcmd_core::problem::ProblemInstance,
        noisy: bool,
        iters: usize,
    ) -> Result<StepSchedule, HarnessError> {
        let schedule = match *self {
            ScheduleConfig::Constant { alpha0: None } => {
                StepSchedule::auto_constant(algorithm, instance, noisy)?
            }
            ScheduleConfig::Constant { alpha0: Some(a) } => {
                StepSchedule::constant(a, algorithm, instance, noisy)?
            }
            ScheduleConfig::OneOverSqrtK { alpha0 } => {
                StepSchedule::one_over_sqrt_k(alpha0.unwrap_or(1.0))?
            }
            ScheduleConfig::FixedHorizon { alpha0, horizon } => {
                StepSchedule::fixed_horizon(alpha0.unwrap_or(1.0), horizon.unwrap_or(iters))?
            }
        };
        Ok(schedule)
    }
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub num_nodes: usize,
    pub n: usize,
    pub m: usize,
    pub edge_prob: f64,
    pub r_scale: f64,
    pub l_rule: LRule,
    pub theta: f64,
    pub mirror_kind: MirrorKind,
    pub algorithms: Vec<Algorithm>,
    /// Per-algorithm schedule overrides; algorithms not listed use their
    /// defaults (constant at the cap; 1/√k for dmd).
    pub schedules: BTreeMap<Algorithm, ScheduleConfig>,
    pub sigma: f64,
    pub iters: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            num_nodes: 30,
            n: 30,
            m: 30,
            edge_prob: 0.3,
            r_scale: 0.1,
            l_rule: LRule::BetaPlusLambda,
            theta: 0.0,
            mirror_kind: MirrorKind::Entropy,
            algorithms: vec![Algorithm::Rlc, Algorithm::MirrorProx, Algorithm::Dmd],
            schedules: BTreeMap::new(),
            sigma: 0.0,
            iters: 2000,
            seeds: vec![0],
            output_dir: PathBuf::from("out"),
            emit_plots: false,
        }
    }
}

impl ExperimentConfig {
    pub fn instance_params(&self) -> InstanceParams {
        InstanceParams {
            num_nodes: self.num_nodes,
            n: self.n,
            m: self.m,
            edge_prob: self.edge_prob,
            r_scale: self.r_scale,
            l_rule: self.l_rule,
            theta: self.theta,
            mirror_kind: self.mirror_kind,
        }
    }

    pub fn schedule_for(&self, algorithm: Algorithm) -> ScheduleConfig {
        self.schedules
            .get(&algorithm)
            .copied()
            .unwrap_or_else(|| ScheduleConfig::default_for(algorithm))
    }

    /// Structural validation plus a cap check of every configured schedule
    /// against the first seed's instance (later seeds are re-checked when
    /// their runs are set up).
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.iters == 0 {
            return Err(HarnessError::Config("iters must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(HarnessError::Config(format!(
                "sigma must be a nonnegative real, got {}",
                self.sigma
            )));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config(
                "at least one algorithm is required".into(),
            ));
        }
        if self.mirror_kind == MirrorKind::Entropy && self.theta > 0.0 {
            return Err(HarnessError::Config(
                "theta > 0 requires the euclidean mirror map (entropy pairs with theta = 0)"
                    .into(),
            ));
        }
        if self.algorithms.contains(&Algorithm::CoRlc) {
            if self.theta == 0.0 {
                return Err(HarnessError::Config(
                    "co_rlc requires theta > 0 (use rlc for the smooth problem)".into(),
                ));
            }
            if self.mirror_kind != MirrorKind::Euclidean {
                return Err(HarnessError::Config(
                    "co_rlc requires the euclidean mirror map".into(),
                ));
            }
        }
        for (&algorithm, schedule) in &self.schedules {
            if algorithm == Algorithm::Dmd
                && !matches!(schedule, ScheduleConfig::OneOverSqrtK { .. })
            {
                return Err(HarnessError::Config(
                    "dmd requires the one_over_sqrt_k schedule".into(),
                ));
            }
        }

        // Cap check against a concrete instance.
        let instance = generate_instance(&self.instance_params(), self.seeds[0])?;
        for &algorithm in &self.algorithms {
            self.schedule_for(algorithm)
                .resolve(algorithm, &instance, self.sigma > 0.0, self.iters)?;
        }
        Ok(())
    }
}

/// Loads and validates a config file. Parse errors carry serde_json's
/// line/column information.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        HarnessError::Config(format!("cannot read {}: {e}", path.display()))
    })?;
    let config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
        HarnessError::Config(format!("{}: {e}", path.display()))
    })?;
    config.validate()?;
    Ok(config)
}
