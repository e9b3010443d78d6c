//! Experiment specification: a TOML config file, CLI flag overrides, and the
//! resolution of both into a runnable experiment.

use aebo::benchmarks::{initial_window, TestProblem};
use aebo::optimizer::{Bounds, Mode, Sense};
use serde::Deserialize;
use std::path::PathBuf;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("config file error: {0}")]
    Config(String),
    #[error("exactly one of `problem` and `external_cmd` must be set")]
    TargetAmbiguous,
    #[error("unknown mode '{0}' (expected aebo, aebo_constrained, or fixed_bounds_ei)")]
    UnknownMode(String),
    #[error("unknown sense '{0}' (expected minimize or maximize)")]
    UnknownSense(String),
    #[error("external runs require initial_lower and initial_upper of equal length")]
    MissingExternalBounds,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("noise_std applies only to registry problems")]
    NoiseOnExternal,
    #[error(transparent)]
    Bench(#[from] aebo::benchmarks::BenchError),
    #[error("invalid bounds: {0}")]
    Bounds(String),
}

/// On-disk experiment schema. Every field is optional; flags override file
/// values and defaults fill the rest.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: Option<String>,
    pub external_cmd: Option<String>,
    pub mode: Option<String>,
    pub sense: Option<String>,
    pub seeds: Option<Vec<u64>>,
    pub budget: Option<usize>,
    pub n_init: Option<usize>,
    pub dim: Option<usize>,
    pub noise_std: Option<f64>,
    pub out: Option<PathBuf>,
    pub initial_lower: Option<Vec<f64>>,
    pub initial_upper: Option<Vec<f64>>,
    pub epsilon: Option<f64>,
    pub xi0: Option<f64>,
    pub kappa: Option<f64>,
    pub delta: Option<f64>,
    /// Seconds to wait for one external evaluation (default 3600).
    pub eval_timeout_secs: Option<u64>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        toml::from_str(text).map_err(|e| SpecError::Config(e.to_string()))
    }

    /// Field-wise override: `Some` values in `other` win.
    pub fn overridden_by(mut self, other: ExperimentSpec) -> ExperimentSpec {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if other.$field.is_some() { self.$field = other.$field; })*
            };
        }
        take!(
            problem,
            external_cmd,
            mode,
            sense,
            seeds,
            budget,
            n_init,
            dim,
            noise_std,
            out,
            initial_lower,
            initial_upper,
            epsilon,
            xi0,
            kappa,
            delta,
            eval_timeout_secs
        );
        self
    }
}

/// What one run evaluates.
#[derive(Debug, Clone)]
pub enum Target {
    Problem(TestProblem),
    External {
        command: String,
        dim: usize,
        timeout: Duration,
    },
}

impl Target {
    pub fn label(&self) -> String {
        match self {
            Target::Problem(p) => p.name().to_string(),
            Target::External { .. } => "external".to_string(),
        }
    }
}

/// A fully resolved experiment, ready to execute.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub target: Target,
    pub mode: Mode,
    pub sense: Sense,
    pub seeds: Vec<u64>,
    pub budget: usize,
    pub n_init: usize,
    pub noise_std: f64,
    pub initial_bounds: Bounds,
    pub out_dir: PathBuf,
    pub epsilon: Option<f64>,
    pub xi0: Option<f64>,
    pub kappa: Option<f64>,
    pub delta: Option<f64>,
}

pub fn resolve(spec: &ExperimentSpec) -> Result<ResolvedExperiment, SpecError> {
    let seeds = spec.seeds.clone().unwrap_or_else(|| vec![0]);
    if seeds.is_empty() {
        return Err(SpecError::NoSeeds);
    }

    let target = match (&spec.problem, &spec.external_cmd) {
        (Some(name), None) => Target::Problem(TestProblem::by_name(name, spec.dim)?),
        (None, Some(cmd)) => {
            let dim = spec
                .dim
                .or_else(|| spec.initial_lower.as_ref().map(Vec::len))
                .ok_or(SpecError::MissingExternalBounds)?;
            Target::External {
                command: cmd.clone(),
                dim,
                timeout: Duration::from_secs(spec.eval_timeout_secs.unwrap_or(3600)),
            }
        }
        _ => return Err(SpecError::TargetAmbiguous),
    };

    let noise_std = spec.noise_std.unwrap_or(0.0);
    if noise_std > 0.0 && matches!(target, Target::External { .. }) {
        return Err(SpecError::NoiseOnExternal);
    }

    let initial_bounds = match (&spec.initial_lower, &spec.initial_upper) {
        (Some(lo), Some(hi)) => {
            Bounds::new(lo.clone(), hi.clone()).map_err(|e| SpecError::Bounds(e.to_string()))?
        }
        (None, None) => match &target {
            Target::Problem(p) => initial_window(p),
            Target::External { .. } => return Err(SpecError::MissingExternalBounds),
        },
        _ => return Err(SpecError::MissingExternalBounds),
    };

    let mode = match spec.mode.as_deref() {
        Some(s) => Mode::parse(s).ok_or_else(|| SpecError::UnknownMode(s.to_string()))?,
        None => match &target {
            Target::Problem(p) if p.is_constrained() => Mode::AeboConstrained,
            _ => Mode::Aebo,
        },
    };

    let sense = match spec.sense.as_deref() {
        Some("minimize") => Sense::Minimize,
        Some("maximize") => Sense::Maximize,
        Some(other) => return Err(SpecError::UnknownSense(other.to_string())),
        // registry problems are minimization; external objectives default to
        // rewards (maximize), matching the hyperparameter-tuning use case
        None => match &target {
            Target::Problem(_) => Sense::Minimize,
            Target::External { .. } => Sense::Maximize,
        },
    };

    let d = initial_bounds.dim();
    Ok(ResolvedExperiment {
        target,
        mode,
        sense,
        seeds,
        budget: spec.budget.unwrap_or(50 * d),
        n_init: spec.n_init.unwrap_or(5 * d),
        noise_std,
        initial_bounds,
        out_dir: spec.out.clone().unwrap_or_else(|| PathBuf::from("results")),
        epsilon: spec.epsilon,
        xi0: spec.xi0,
        kappa: spec.kappa,
        delta: spec.delta,
    })
}
