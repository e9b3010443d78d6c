//! The outer optimization loop: LHS initialization, per-iteration GP refit,
//! adaptive tau, bounds expansion, inner acquisition search, evaluation, and
//! incumbent tracking. Also a fixed-bounds EI baseline that skips the
//! expansion machinery.
//!
//! All internal math follows the maximization convention; minimization is
//! handled by negating outputs on ingestion and reporting raw values back.

use crate::acquisition::{AcquisitionContext, FeasibilityModel};
use crate::adaptive_control::{anneal_xi, ei_floor, sigma_zero, solve_tau, AnnealSchedule, ControlParams};
use crate::expansion::{feasible_domain_bounds, EigenMode, ExpansionBounds};
use crate::gp::{GpModel, ObservationSet};
use crate::inner_search::{propose, SearchConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

/// Fixed GP noise variance (relative to k0 = 1) for noiseless objectives.
const NOISELESS_JITTER: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("bounds are degenerate on axis {0}")]
    DegenerateBounds(usize),
    #[error("black box dimension {got} does not match configured dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("run aborted at iteration {iteration}: {reason}")]
    Aborted {
        iteration: usize,
        reason: String,
        partial: Box<RunRecord>,
    },
}

/// Evaluation failure reported by a black box (e.g. a subprocess protocol
/// violation). Distinct from an infeasible-but-successful evaluation.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

/// One black-box evaluation: `y` is `None` where the objective has no
/// definition (only meaningful together with `feasible = false`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub y: Option<f64>,
    pub feasible: bool,
}

impl Evaluation {
    pub fn finite(y: f64) -> Self {
        Self {
            y: Some(y),
            feasible: true,
        }
    }
}

/// An expensive objective together with its input dimension.
pub trait BlackBox {
    fn dim(&self) -> usize;
    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation, EvalError>;
}

/// Plain axis-aligned box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, RunError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(RunError::InvalidConfig("bounds must be non-empty and consistent"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(RunError::DegenerateBounds(i));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (l, u))| *xi >= *l && *xi <= *u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Aebo,
    AeboConstrained,
    FixedBoundsEi,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Aebo => "aebo",
            Mode::AeboConstrained => "aebo_constrained",
            Mode::FixedBoundsEi => "fixed_bounds_ei",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "aebo" => Some(Mode::Aebo),
            "aebo_constrained" => Some(Mode::AeboConstrained),
            "fixed_bounds_ei" => Some(Mode::FixedBoundsEi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    fn sign(&self) -> f64 {
        match self {
            Sense::Maximize => 1.0,
            Sense::Minimize => -1.0,
        }
    }
}

/// All protocol knobs of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub initial_bounds: Bounds,
    /// Initial design size (default 5 d).
    pub n_init: usize,
    /// Total evaluation budget including the initial design (default 50 d).
    pub budget: usize,
    pub control: ControlParams,
    /// Minimum improvement offset applied to the EI everywhere.
    pub epsilon: f64,
    pub search: SearchConfig,
    pub mode: Mode,
    pub sense: Sense,
    pub seed: u64,
    pub eigen_mode: EigenMode,
    /// Estimate the GP noise variance jointly instead of fixing the
    /// noiseless jitter; enable for noisy objectives.
    pub estimate_noise: bool,
}

impl OptimizerConfig {
    /// Protocol defaults for the given initial box: budget 50 d, init 5 d,
    /// xi0 = 0.1, kappa = 0.1, delta = 0.01, epsilon = 0.01.
    pub fn new(initial_bounds: Bounds) -> Self {
        let d = initial_bounds.dim();
        Self {
            initial_bounds,
            n_init: 5 * d,
            budget: 50 * d,
            control: ControlParams::default(),
            epsilon: 0.01,
            search: SearchConfig::for_dim(d),
            mode: Mode::Aebo,
            sense: Sense::Minimize,
            seed: 0,
            eigen_mode: EigenMode::default(),
            estimate_noise: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.initial_bounds.dim()
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.n_init < 2 {
            return Err(RunError::InvalidConfig("n_init must be >= 2"));
        }
        if self.budget < self.n_init {
            return Err(RunError::InvalidConfig("budget must be >= n_init"));
        }
        if self.epsilon < 0.0 || self.epsilon.is_nan() {
            return Err(RunError::InvalidConfig("epsilon must be >= 0"));
        }
        self.control
            .validate()
            .map_err(|_| RunError::InvalidConfig("invalid control parameters"))?;
        self.search
            .validate()
            .map_err(|_| RunError::InvalidConfig("invalid search configuration"))?;
        Ok(())
    }
}

/// One evaluated iteration. Control fields (`tau`, bounds) are `None` during
/// the initial design and in modes where they do not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    pub x: Vec<f64>,
    pub y: Option<f64>,
    pub feasible: bool,
    pub best: Option<f64>,
    pub tau: Option<f64>,
    pub bounds_lower: Option<Vec<f64>>,
    pub bounds_upper: Option<Vec<f64>>,
    pub fallback: bool,
}

/// Full history of a run plus the final solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dim: usize,
    pub rows: Vec<IterationRow>,
    pub best_x: Option<Vec<f64>>,
    pub best_y: Option<f64>,
}

impl RunRecord {
    pub fn evaluations(&self) -> usize {
        self.rows.len()
    }
}

/// Latin hypercube sample: each dimension's `n` coordinates occupy `n`
/// distinct equal-width strata, one point per stratum, uniform within the
/// stratum, with strata permuted independently per dimension.
pub fn lhs_sample<R: Rng>(
    bounds: &Bounds,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>, RunError> {
    if n == 0 {
        return Err(RunError::InvalidConfig("sample size must be >= 1"));
    }
    for (i, (l, u)) in bounds.lower.iter().zip(&bounds.upper).enumerate() {
        if u.is_nan() || l.is_nan() || *u <= *l {
            return Err(RunError::DegenerateBounds(i));
        }
    }
    let d = bounds.dim();
    let mut points = vec![vec![0.0; d]; n];
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        strata.shuffle(rng);
        let width = (bounds.upper[j] - bounds.lower[j]) / n as f64;
        for (i, point) in points.iter_mut().enumerate() {
            let u: f64 = rng.gen_range(0.0..1.0);
            point[j] = bounds.lower[j] + (strata[i] as f64 + u) * width;
        }
    }
    Ok(points)
}

struct RunState {
    sense: Sense,
    mode: Mode,
    points: Vec<Vec<f64>>,
    raw_ys: Vec<Option<f64>>,
    feasible: Vec<bool>,
    best_idx: Option<usize>,
    rows: Vec<IterationRow>,
}

impl RunState {
    fn new(sense: Sense, mode: Mode) -> Self {
        Self {
            sense,
            mode,
            points: Vec::new(),
            raw_ys: Vec::new(),
            feasible: Vec::new(),
            best_idx: None,
            rows: Vec::new(),
        }
    }

    fn counts_toward_incumbent(&self, idx: usize) -> bool {
        let finite = self.raw_ys[idx].map(|y| y.is_finite()).unwrap_or(false);
        match self.mode {
            Mode::AeboConstrained => finite && self.feasible[idx],
            _ => finite,
        }
    }

    fn ingest(
        &mut self,
        iteration: usize,
        x: Vec<f64>,
        eval: Evaluation,
        tau: Option<f64>,
        bounds: Option<&ExpansionBounds>,
        fallback: bool,
    ) {
        self.points.push(x.clone());
        self.raw_ys.push(eval.y);
        self.feasible.push(eval.feasible);
        let idx = self.points.len() - 1;
        if self.counts_toward_incumbent(idx) {
            let better = match self.best_idx {
                None => true,
                Some(b) => {
                    let sign = self.sense.sign();
                    sign * self.raw_ys[idx].unwrap() > sign * self.raw_ys[b].unwrap()
                }
            };
            if better {
                self.best_idx = Some(idx);
            }
        }
        self.rows.push(IterationRow {
            iteration,
            x,
            y: eval.y,
            feasible: eval.feasible,
            best: self.best_idx.and_then(|b| self.raw_ys[b]),
            tau,
            bounds_lower: bounds.map(|b| b.lower().to_vec()),
            bounds_upper: bounds.map(|b| b.upper().to_vec()),
            fallback,
        });
    }

    /// Observations with a finite output, negated into the internal
    /// maximization convention, for GP fitting.
    fn fit_subset(&self) -> ObservationSet {
        let sign = self.sense.sign();
        let mut obs = ObservationSet::new();
        for i in 0..self.points.len() {
            if let Some(y) = self.raw_ys[i] {
                if y.is_finite() {
                    obs.push(self.points[i].clone(), sign * y, self.feasible[i])
                        .expect("dimensions are consistent by construction");
                }
            }
        }
        obs
    }

    /// Incumbent in internal units: best feasible when available, otherwise
    /// best finite output (keeps the EI target defined before the first
    /// feasible observation in constrained mode).
    fn internal_incumbent(&self) -> Option<(Vec<f64>, f64)> {
        let sign = self.sense.sign();
        if let Some(b) = self.best_idx {
            return Some((self.points[b].clone(), sign * self.raw_ys[b].unwrap()));
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.points.len() {
            if let Some(y) = self.raw_ys[i] {
                if y.is_finite() {
                    let v = sign * y;
                    if best.map(|(_, bv)| v > bv).unwrap_or(true) {
                        best = Some((i, v));
                    }
                }
            }
        }
        best.map(|(i, v)| (self.points[i].clone(), v))
    }

    fn record(&self) -> RunRecord {
        RunRecord {
            dim: self.points.first().map(Vec::len).unwrap_or(0),
            rows: self.rows.clone(),
            best_x: self.best_idx.map(|b| self.points[b].clone()),
            best_y: self.best_idx.and_then(|b| self.raw_ys[b]),
        }
    }
}

/// Executes the full optimization loop against the black box and returns the
/// per-iteration history. The evaluation count equals the budget exactly;
/// the inner search touches only the surrogate.
pub fn run(blackbox: &mut dyn BlackBox, cfg: &OptimizerConfig) -> Result<RunRecord, RunError> {
    cfg.validate()?;
    let d = cfg.dim();
    if blackbox.dim() != d {
        return Err(RunError::DimensionMismatch {
            expected: d,
            got: blackbox.dim(),
        });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut state = RunState::new(cfg.sense, cfg.mode);

    let abort = |state: &RunState, iteration: usize, reason: String| RunError::Aborted {
        iteration,
        reason,
        partial: Box::new(state.record()),
    };

    // initial design
    let init_points = lhs_sample(&cfg.initial_bounds, cfg.n_init, &mut rng)?;
    for (i, x) in init_points.into_iter().enumerate() {
        let t = i + 1;
        let eval = evaluate_checked(blackbox, &x, cfg.mode)
            .map_err(|reason| abort(&state, t, reason))?;
        state.ingest(t, x, eval, None, None, false);
    }

    let schedule = AnnealSchedule {
        start_iteration: cfg.n_init + 1,
        end_iteration: cfg.budget,
        xi0: cfg.control.xi0,
    };
    let fixed_noise = if cfg.estimate_noise {
        None
    } else {
        Some(NOISELESS_JITTER)
    };

    for t in cfg.n_init + 1..=cfg.budget {
        let obs = state.fit_subset();
        if obs.len() < 2 {
            return Err(abort(
                &state,
                t,
                "fewer than two finite observations to fit the surrogate".into(),
            ));
        }
        let model = GpModel::fit(&obs, fixed_noise)
            .map_err(|e| abort(&state, t, format!("surrogate fit failed: {e}")))?;
        let (incumbent_x, incumbent_internal) = state
            .internal_incumbent()
            .expect("at least two finite observations exist");
        let f_prime = model.normalize(incumbent_internal);

        let feas_model = match cfg.mode {
            Mode::AeboConstrained => Some(
                FeasibilityModel::fit(&state.points, &state.feasible)
                    .map_err(|e| abort(&state, t, format!("feasibility fit failed: {e}")))?,
            ),
            _ => None,
        };

        let (tau, bounds, search_cfg) = match cfg.mode {
            Mode::FixedBoundsEi => {
                // no variance constraint: give the filter full-k0 slack
                let mut search = cfg.search;
                search.constraint_tolerance = model.params().signal_ceiling;
                let bounds = ExpansionBounds::new(
                    cfg.initial_bounds.lower.clone(),
                    cfg.initial_bounds.upper.clone(),
                    vec![0.0; d],
                    cfg.eigen_mode,
                )
                .map_err(|e| abort(&state, t, format!("invalid search box: {e}")))?;
                (None, bounds, search)
            }
            Mode::Aebo | Mode::AeboConstrained => {
                let xi = anneal_xi(&schedule, t);
                let sigma0 = sigma_zero(xi, &cfg.control)
                    .map_err(|e| abort(&state, t, format!("control failure: {e}")))?;
                let ei0 = ei_floor(sigma0, cfg.control.delta);
                let k0 = model.params().signal_ceiling;
                let tau = solve_tau(f_prime, k0, ei0, &cfg.control)
                    .map_err(|e| abort(&state, t, format!("tau solve failed: {e}")))?;
                let bounds =
                    feasible_domain_bounds(&state.points, &model, tau, cfg.eigen_mode)
                        .map_err(|e| abort(&state, t, format!("expansion failed: {e}")))?;
                (Some(tau), bounds, cfg.search)
            }
        };

        let ctx = AcquisitionContext::new(
            f_prime,
            cfg.epsilon,
            tau.unwrap_or(0.5),
            feas_model.as_ref(),
        )
        .map_err(|e| abort(&state, t, format!("invalid acquisition context: {e}")))?;

        let proposal = propose(&model, &ctx, &bounds, &incumbent_x, &search_cfg, &mut rng)
            .map_err(|e| abort(&state, t, format!("inner search failed: {e}")))?;

        let eval = evaluate_checked(blackbox, &proposal.x, cfg.mode)
            .map_err(|reason| abort(&state, t, reason))?;
        state.ingest(t, proposal.x, eval, tau, Some(&bounds), proposal.fallback);
    }

    Ok(state.record())
}

/// Applies the non-finite-output policy: in constrained mode an undefined or
/// non-finite objective becomes an infeasible observation; otherwise it
/// aborts the run.
fn evaluate_checked(
    blackbox: &mut dyn BlackBox,
    x: &[f64],
    mode: Mode,
) -> Result<Evaluation, String> {
    let eval = blackbox
        .evaluate(x)
        .map_err(|e| format!("black-box evaluation failed: {e}"))?;
    match eval.y {
        Some(y) if y.is_finite() => Ok(eval),
        _ if mode == Mode::AeboConstrained => Ok(Evaluation {
            y: None,
            feasible: false,
        }),
        Some(y) => Err(format!("black box returned non-finite objective {y}")),
        None => Err("black box returned no objective value in unconstrained mode".into()),
    }
}
