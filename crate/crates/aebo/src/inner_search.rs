//! Maximization of the acquisition inside the feasible domain bounds,
//! subject to the variance constraint (and, in constrained mode, modeled
//! feasibility >= 0.5).
//!
//! Candidates are split between global search (uniform in the bounds) and
//! local search (Gaussian around the incumbent), the best few of each pool
//! are refined by penalized projected gradient ascent, and the best
//! constraint-satisfying point wins. Scores are kept in log domain so
//! far-region candidates with underflowing EI still rank correctly.

use crate::acquisition::{self, AcquisitionContext, AcquisitionError};
use crate::expansion::ExpansionBounds;
use crate::gp::{GpError, GpModel};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search bounds are degenerate on axis {0}")]
    DegenerateBounds(usize),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
}

/// Candidate budget and refinement knobs for one acquisition maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Total initial candidates per iteration.
    pub n_candidates: usize,
    /// Fraction of candidates assigned to local search near the incumbent.
    pub local_fraction: f64,
    /// Std of the local sampling cloud, as a multiple of the GP lengthscale.
    pub local_radius_scale: f64,
    /// Ascent steps per refined candidate.
    pub refine_steps: usize,
    /// Slack added to the variance threshold when filtering.
    pub constraint_tolerance: f64,
}

impl SearchConfig {
    /// Defaults scaled to the problem dimension: 100 d candidates, an even
    /// global/local split, one-lengthscale local radius.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            n_candidates: 100 * dim.max(1),
            local_fraction: 0.5,
            local_radius_scale: 1.0,
            refine_steps: 60,
            constraint_tolerance: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        if self.n_candidates < 2 {
            return Err(SearchError::InvalidConfig("n_candidates must be >= 2"));
        }
        if !(0.0..=1.0).contains(&self.local_fraction) {
            return Err(SearchError::InvalidConfig("local_fraction must lie in [0, 1]"));
        }
        if self.local_radius_scale <= 0.0 || self.local_radius_scale.is_nan() {
            return Err(SearchError::InvalidConfig("local_radius_scale must be positive"));
        }
        if self.constraint_tolerance < 0.0 || self.constraint_tolerance.is_nan() {
            return Err(SearchError::InvalidConfig("constraint_tolerance must be >= 0"));
        }
        Ok(())
    }
}

/// Outcome of one acquisition maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub x: Vec<f64>,
    /// Acquisition value at `x` (EI, times Pr(C) in constrained mode).
    pub acquisition: f64,
    /// Set when no candidate satisfied the constraints and the minimum
    /// variance candidate was returned instead.
    pub fallback: bool,
}

const REFINE_PER_POOL: usize = 5;
const PENALTY_WEIGHTS: [f64; 3] = [10.0, 100.0, 1000.0];

struct Scored {
    x: Vec<f64>,
    log_score: f64,
    var: f64,
    admissible: bool,
}

/// Maximizes the acquisition over the bounds and returns the best candidate
/// satisfying `sigma^2(x) <= tau k0 + tol` (and feasibility >= 0.5 when a
/// feasibility model is present). Falls back to the minimum-variance
/// candidate, flagged, when nothing satisfies the variance constraint.
pub fn propose<R: Rng>(
    model: &GpModel,
    ctx: &AcquisitionContext,
    bounds: &ExpansionBounds,
    incumbent_x: &[f64],
    cfg: &SearchConfig,
    rng: &mut R,
) -> Result<Proposal, SearchError> {
    cfg.validate()?;
    let dim = bounds.dim();
    for i in 0..dim {
        if bounds.upper()[i] <= bounds.lower()[i] {
            return Err(SearchError::DegenerateBounds(i));
        }
    }

    let n_local = ((cfg.n_candidates as f64) * cfg.local_fraction).round() as usize;
    let n_global = cfg.n_candidates - n_local.min(cfg.n_candidates);
    let radius = cfg.local_radius_scale * model.params().lengthscale;

    let mut candidates = Vec::with_capacity(cfg.n_candidates);
    for _ in 0..n_global {
        let x: Vec<f64> = (0..dim)
            .map(|i| rng.gen_range(bounds.lower()[i]..bounds.upper()[i]))
            .collect();
        candidates.push(x);
    }
    for _ in 0..n_local {
        let mut x: Vec<f64> = incumbent_x
            .iter()
            .map(|&c| c + radius * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
            .collect();
        bounds.clip(&mut x);
        candidates.push(x);
    }

    let threshold = ctx.tau * model.params().signal_ceiling + cfg.constraint_tolerance;
    let mut scored = Vec::with_capacity(candidates.len());
    for x in candidates {
        scored.push(score(model, ctx, x, threshold)?);
    }

    // refine the most promising few from each pool
    let split = n_global;
    let mut refine_starts = Vec::new();
    for pool in [0..split, split..scored.len()] {
        let mut order: Vec<usize> = pool.collect();
        order.sort_by(|&a, &b| {
            let sa = &scored[a];
            let sb = &scored[b];
            sb.admissible
                .cmp(&sa.admissible)
                .then(sb.log_score.total_cmp(&sa.log_score))
        });
        refine_starts.extend(order.into_iter().take(REFINE_PER_POOL));
    }

    for idx in refine_starts {
        let mut x = scored[idx].x.clone();
        for weight in PENALTY_WEIGHTS {
            let eval = |p: &[f64]| penalized_objective(model, ctx, p, threshold, weight);
            x = refine(&x, &eval, bounds, cfg.refine_steps);
        }
        // the penalized optimum can sit just outside the variance boundary;
        // repair it by pulling toward the nearest training point
        if let Some(repaired) = repair_variance(model, bounds, &x, threshold) {
            scored.push(score(model, ctx, repaired, threshold)?);
        }
        scored.push(score(model, ctx, x, threshold)?);
    }

    let best = scored
        .iter()
        .filter(|s| s.admissible)
        .max_by(|a, b| a.log_score.total_cmp(&b.log_score));
    if let Some(s) = best {
        return Ok(Proposal {
            x: s.x.clone(),
            acquisition: s.log_score.exp(),
            fallback: false,
        });
    }

    // nothing satisfied the constraints: return the lowest-variance candidate
    let s = scored
        .iter()
        .min_by(|a, b| a.var.total_cmp(&b.var))
        .expect("candidate set is non-empty");
    Ok(Proposal {
        x: s.x.clone(),
        acquisition: s.log_score.exp(),
        fallback: true,
    })
}

/// Projects a variance-infeasible point back onto the feasible side of the
/// `sigma^2 = threshold` boundary by bisecting along the segment to the
/// nearest training input (where the variance is at its noise floor).
fn repair_variance(
    model: &GpModel,
    bounds: &ExpansionBounds,
    x: &[f64],
    threshold: f64,
) -> Option<Vec<f64>> {
    let (_, var) = model.posterior(x).ok()?;
    if var <= threshold {
        return None;
    }
    let nearest = model.train_inputs().iter().min_by(|a, b| {
        let da: f64 = a.iter().zip(x).map(|(ai, xi)| (ai - xi) * (ai - xi)).sum();
        let db: f64 = b.iter().zip(x).map(|(bi, xi)| (bi - xi) * (bi - xi)).sum();
        da.total_cmp(&db)
    })?;
    let at = |t: f64| -> Vec<f64> {
        let mut p: Vec<f64> = x
            .iter()
            .zip(nearest)
            .map(|(xi, ni)| xi + t * (ni - xi))
            .collect();
        bounds.clip(&mut p);
        p
    };
    let (_, var_at_data) = model.posterior(&at(1.0)).ok()?;
    if var_at_data > threshold {
        return None;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        match model.posterior(&at(mid)) {
            Ok((_, v)) if v <= threshold => hi = mid,
            Ok(_) => lo = mid,
            Err(_) => return None,
        }
    }
    Some(at(hi))
}

fn score(
    model: &GpModel,
    ctx: &AcquisitionContext,
    x: Vec<f64>,
    threshold: f64,
) -> Result<Scored, SearchError> {
    let (mean, var) = model.posterior(&x)?;
    let mut log_score = acquisition::log_expected_improvement(mean, var.sqrt(), ctx)?;
    let mut admissible = var <= threshold;
    if let Some(fm) = ctx.feasibility {
        let p = fm.probability(&x)?;
        log_score += p.ln();
        admissible = admissible && p >= 0.5;
    }
    Ok(Scored {
        x,
        log_score,
        var,
        admissible,
    })
}

/// Log acquisition minus quadratic constraint penalties, with its gradient.
/// Returns `None` where the gradient is undefined (zero predictive std).
fn penalized_objective(
    model: &GpModel,
    ctx: &AcquisitionContext,
    x: &[f64],
    threshold: f64,
    weight: f64,
) -> Option<(f64, Vec<f64>)> {
    let (mean, var) = model.posterior(x).ok()?;
    let sigma = var.sqrt();
    if sigma < 1e-12 {
        return None;
    }
    let (dmean, dvar) = model.posterior_gradient(x).ok()?;
    let u = (mean - ctx.target()) / sigma;
    let mut value = sigma.ln() + acquisition::ei_log_h(u);
    let ratio = acquisition::ei_cdf_over_h(u);
    let mut grad: Vec<f64> = (0..x.len())
        .map(|j| {
            let dsigma = dvar[j] / (2.0 * sigma);
            dsigma / sigma + ratio * (dmean[j] - u * dsigma) / sigma
        })
        .collect();

    let k0 = model.params().signal_ceiling;
    let excess = (var - threshold).max(0.0) / k0;
    if excess > 0.0 {
        value -= weight * excess * excess;
        for j in 0..x.len() {
            grad[j] -= 2.0 * weight * excess * dvar[j] / k0;
        }
    }

    if let Some(fm) = ctx.feasibility {
        if let Some(label_gp) = fm.model() {
            let (mu_c, var_c) = label_gp.posterior(x).ok()?;
            let (dmu_c, dvar_c) = label_gp.posterior_gradient(x).ok()?;
            let s = (var_c + 1.0).sqrt();
            let z = mu_c / s;
            let dz: Vec<f64> = (0..x.len())
                .map(|j| dmu_c[j] / s - mu_c * dvar_c[j] / (2.0 * s * s * s))
                .collect();
            let hazard = acquisition::normal_hazard(z);
            for j in 0..x.len() {
                grad[j] += hazard * dz[j];
            }
            let p = crate::stdnorm::cdf(z);
            value += p.max(f64::MIN_POSITIVE).ln();
            let shortfall = (0.5 - p).max(0.0);
            if shortfall > 0.0 {
                value -= weight * shortfall * shortfall;
                let pdf_z = crate::stdnorm::pdf(z);
                for j in 0..x.len() {
                    grad[j] += 2.0 * weight * shortfall * pdf_z * dz[j];
                }
            }
        }
    }

    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return None;
    }
    Some((value, grad))
}

/// Projected gradient ascent with backtracking: clips every iterate into the
/// bounds and only accepts steps that improve the objective, so the penalized
/// objective never decreases and the iterate never leaves the box. Returns
/// the start unchanged when the objective or gradient is undefined there.
pub fn refine<F>(start: &[f64], eval: &F, bounds: &ExpansionBounds, max_steps: usize) -> Vec<f64>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let Some((mut val, mut grad)) = eval(start) else {
        return start.to_vec();
    };
    let mut x = start.to_vec();
    let width: f64 = bounds
        .upper()
        .iter()
        .zip(bounds.lower())
        .map(|(u, l)| u - l)
        .fold(f64::INFINITY, f64::min);
    let mut step = 0.1 * width;
    let min_step = 1e-12 * width;

    for _ in 0..max_steps {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm == 0.0 || step < min_step {
            break;
        }
        let mut cand: Vec<f64> = x
            .iter()
            .zip(&grad)
            .map(|(xi, gi)| xi + step * gi / norm)
            .collect();
        bounds.clip(&mut cand);
        match eval(&cand) {
            Some((v, g)) if v > val => {
                x = cand;
                val = v;
                grad = g;
                step *= 1.5;
            }
            _ => step *= 0.5,
        }
    }
    x
}
