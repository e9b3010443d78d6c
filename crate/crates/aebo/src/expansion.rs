//! Feasible-domain bounds: the minimum bounding box of evaluated samples
//! expanded along each axis by a rate derived from the GP covariance spectrum.
//!
//! In `LambdaMax` mode the box provably contains the whole low-uncertainty
//! region `{x : sigma^2(x) <= tau k0}`. Those bounds are usually much larger
//! than needed, so `LambdaMin` swaps in the smallest eigenvalue as a tighter
//! heuristic; the inner search still enforces the variance constraint
//! directly, so correctness does not depend on containment in that mode.

use crate::gp::{GpError, GpModel};
use nalgebra::SymmetricEigen;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExpansionError {
    #[error("cannot bound an empty point set")]
    EmptyPointSet,
    #[error("expansion rate requires more than one evaluated point, got {0}")]
    TooFewPoints(usize),
    #[error("tau must lie in (0, 1), got {0}")]
    InvalidTau(f64),
    #[error("eigen-decomposition of the covariance matrix did not converge")]
    EigenFailure,
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Which eigenvalue of `(K + sigma_n^2 I)^-1` drives the expansion rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMode {
    /// Guaranteed containment of the low-uncertainty region; loose.
    LambdaMax,
    /// Tighter practical bounds; containment becomes heuristic.
    #[default]
    LambdaMin,
}

/// Axis-aligned search box for one iteration: the data bounding box expanded
/// by `rate[i]` on each side of axis `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionBounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    rate: Vec<f64>,
    eigen_mode: EigenMode,
}

impl ExpansionBounds {
    /// Builds bounds directly from a box and per-axis rates (the box must
    /// already include the data bounding box).
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        rate: Vec<f64>,
        eigen_mode: EigenMode,
    ) -> Result<Self, ExpansionError> {
        if lower.is_empty() || lower.len() != upper.len() || lower.len() != rate.len() {
            return Err(ExpansionError::EmptyPointSet);
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u)
            || rate.iter().any(|r| r.is_nan() || *r < 0.0)
        {
            return Err(ExpansionError::EmptyPointSet);
        }
        Ok(Self {
            lower,
            upper,
            rate,
            eigen_mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn rate(&self) -> &[f64] {
        &self.rate
    }

    pub fn eigen_mode(&self) -> EigenMode {
        self.eigen_mode
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(xi, (l, u))| *xi >= *l && *xi <= *u)
    }

    /// Clips a point into the box, coordinate-wise.
    pub fn clip(&self, x: &mut [f64]) {
        for ((xi, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *xi = xi.clamp(*l, *u);
        }
    }
}

/// Coordinate-wise extrema of a non-empty point set.
pub fn min_bounding_box(points: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>), ExpansionError> {
    let first = points.first().ok_or(ExpansionError::EmptyPointSet)?;
    let mut lower = first.clone();
    let mut upper = first.clone();
    for p in &points[1..] {
        for (i, v) in p.iter().enumerate() {
            lower[i] = lower[i].min(*v);
            upper[i] = upper[i].max(*v);
        }
    }
    Ok((lower, upper))
}

/// `r_i = sqrt(C) l_i` with `C = max(0, -log((1-tau) k0 / (N lambda)))`.
pub fn rate_from_eigenvalue(
    lambda: f64,
    k0: f64,
    n: usize,
    tau: f64,
    lengthscales: &[f64],
) -> Vec<f64> {
    let c = (-((1.0 - tau) * k0 / (n as f64 * lambda)).ln()).max(0.0);
    let root = c.sqrt();
    lengthscales.iter().map(|l| root * l).collect()
}

/// Per-axis expansion rate from the spectrum of `A = (K + sigma_n^2 I)^-1`.
pub fn expansion_rate(
    model: &GpModel,
    n: usize,
    tau: f64,
    eigen_mode: EigenMode,
) -> Result<Vec<f64>, ExpansionError> {
    if n <= 1 {
        return Err(ExpansionError::TooFewPoints(n));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(ExpansionError::InvalidTau(tau));
    }
    let cov = model.covariance_matrix();
    let eig = SymmetricEigen::try_new(cov, f64::EPSILON, 0).ok_or(ExpansionError::EigenFailure)?;
    // eigenvalues of A are reciprocals of those of K + sigma_n^2 I
    let (mut cov_min, mut cov_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in eig.eigenvalues.iter() {
        cov_min = cov_min.min(v);
        cov_max = cov_max.max(v);
    }
    if cov_min <= 0.0 || cov_min.is_nan() {
        return Err(ExpansionError::EigenFailure);
    }
    let lambda = match eigen_mode {
        EigenMode::LambdaMax => 1.0 / cov_min,
        EigenMode::LambdaMin => 1.0 / cov_max,
    };
    let params = model.params();
    let lengthscales = vec![params.lengthscale; model.dim()];
    Ok(rate_from_eigenvalue(
        lambda,
        params.signal_ceiling,
        n,
        tau,
        &lengthscales,
    ))
}

/// Bounding box of the evaluated points expanded by the per-axis rate.
pub fn feasible_domain_bounds(
    points: &[Vec<f64>],
    model: &GpModel,
    tau: f64,
    eigen_mode: EigenMode,
) -> Result<ExpansionBounds, ExpansionError> {
    let (mut lower, mut upper) = min_bounding_box(points)?;
    let rate = expansion_rate(model, points.len(), tau, eigen_mode)?;
    for i in 0..lower.len() {
        lower[i] -= rate[i];
        upper[i] += rate[i];
    }
    ExpansionBounds::new(lower, upper, rate, eigen_mode)
}
