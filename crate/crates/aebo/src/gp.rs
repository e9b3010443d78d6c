//! Gaussian process regression with an isotropic RBF kernel.
//!
//! The surrogate keeps outputs z-score normalized, caches the Cholesky factor
//! of `K + sigma_n^2 I` and the weight vector `alpha = (K + sigma_n^2 I)^-1 y`,
//! and exposes posterior mean/variance together with their analytic gradients
//! for the inner acquisition search.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Degenerate-std cutoff below which output normalization falls back to scale 1.
const STD_FLOOR: f64 = 1e-12;

/// Errors from fitting or querying a GP model.
#[derive(Debug, Error)]
pub enum GpError {
    #[error("need at least {min} observations to fit, got {got}")]
    TooFewObservations { min: usize, got: usize },
    #[error("output at index {0} is not finite")]
    NonFiniteOutput(usize),
    #[error("dimension mismatch: model dimension {expected}, query dimension {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("covariance factorization failed after jitter escalation up to {max_jitter:e}")]
    FactorizationFailed { max_jitter: f64 },
    #[error("invalid kernel parameters: {0}")]
    InvalidParams(&'static str),
    #[error("observation set is empty")]
    Empty,
    #[error("observation fields have mismatched lengths")]
    LengthMismatch,
}

/// Hyperparameters of the isotropic RBF kernel
/// `k(x, x') = k0 * exp(-||x - x'||^2 / (2 l^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Shared lengthscale `l` across all input dimensions.
    pub lengthscale: f64,
    /// Prior variance `k0 = k(x, x)`, the variance limit far from data.
    pub signal_ceiling: f64,
    /// Observation noise variance `sigma_n^2`.
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(
        lengthscale: f64,
        signal_ceiling: f64,
        noise_variance: f64,
    ) -> Result<Self, GpError> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(GpError::InvalidParams("lengthscale must be positive"));
        }
        if !(signal_ceiling > 0.0 && signal_ceiling.is_finite()) {
            return Err(GpError::InvalidParams("signal ceiling k0 must be positive"));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(GpError::InvalidParams("noise variance must be non-negative"));
        }
        Ok(Self {
            lengthscale,
            signal_ceiling,
            noise_variance,
        })
    }

    /// Kernel value between two points.
    pub fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let sq: f64 = a
            .iter()
            .zip(b)
            .map(|(ai, bi)| {
                let d = ai - bi;
                d * d
            })
            .sum();
        self.signal_ceiling * (-sq / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// Evaluated points with their raw outputs and feasibility labels.
///
/// Outputs are stored exactly as returned by the black box; entries may be
/// NaN for evaluations whose objective was undefined (those are excluded
/// from GP fitting by the caller).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    points: Vec<Vec<f64>>,
    raw_outputs: Vec<f64>,
    feasible: Vec<bool>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_parts(
        points: Vec<Vec<f64>>,
        raw_outputs: Vec<f64>,
        feasible: Vec<bool>,
    ) -> Result<Self, GpError> {
        if points.len() != raw_outputs.len() || points.len() != feasible.len() {
            return Err(GpError::LengthMismatch);
        }
        let mut set = Self::new();
        for ((x, y), ok) in points.into_iter().zip(raw_outputs).zip(feasible) {
            set.push(x, y, ok)?;
        }
        Ok(set)
    }

    /// Appends one evaluation. All points must share the same dimension.
    pub fn push(&mut self, x: Vec<f64>, y: f64, feasible: bool) -> Result<(), GpError> {
        if x.is_empty() {
            return Err(GpError::InvalidParams("points must have dimension >= 1"));
        }
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(GpError::DimensionMismatch {
                    expected: d,
                    got: x.len(),
                });
            }
        }
        self.points.push(x);
        self.raw_outputs.push(y);
        self.feasible.push(feasible);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn raw_outputs(&self) -> &[f64] {
        &self.raw_outputs
    }

    pub fn feasible(&self) -> &[bool] {
        &self.feasible
    }
}

/// A fitted GP. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    train_inputs: Vec<Vec<f64>>,
    normalized_outputs: DVector<f64>,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    norm_mean: f64,
    norm_scale: f64,
    jitter: f64,
    lml: f64,
}

impl GpModel {
    /// Fits a GP to the observations: z-score normalizes outputs, selects the
    /// lengthscale (and, when `fixed_noise` is `None`, the noise variance) by
    /// maximizing the log marginal likelihood via multi-start coordinate
    /// search over log-parameters, then caches the factorization.
    pub fn fit(observations: &ObservationSet, fixed_noise: Option<f64>) -> Result<Self, GpError> {
        let n = observations.len();
        if n < 2 {
            return Err(GpError::TooFewObservations { min: 2, got: n });
        }
        if let Some(i) = observations.raw_outputs.iter().position(|y| !y.is_finite()) {
            return Err(GpError::NonFiniteOutput(i));
        }
        let (mean, scale) = normalization_of(&observations.raw_outputs);
        let y_norm: Vec<f64> = observations
            .raw_outputs
            .iter()
            .map(|y| (y - mean) / scale)
            .collect();
        Self::fit_normalized(observations.points.clone(), y_norm, fixed_noise, mean, scale)
    }

    /// Same as [`GpModel::fit`] but regresses on the outputs as given, without
    /// z-score normalization. Used for the feasibility label model, whose
    /// probit link requires raw +1/-1 targets.
    pub fn fit_unnormalized(
        points: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        fixed_noise: Option<f64>,
    ) -> Result<Self, GpError> {
        let n = points.len();
        if n < 2 {
            return Err(GpError::TooFewObservations { min: 2, got: n });
        }
        if points.len() != outputs.len() {
            return Err(GpError::LengthMismatch);
        }
        if let Some(i) = outputs.iter().position(|y| !y.is_finite()) {
            return Err(GpError::NonFiniteOutput(i));
        }
        Self::fit_normalized(points, outputs, fixed_noise, 0.0, 1.0)
    }

    /// Builds a model with fixed kernel parameters and identity normalization.
    /// No hyperparameter search; accepts N >= 1.
    pub fn with_params(
        points: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        params: KernelParams,
    ) -> Result<Self, GpError> {
        if points.is_empty() {
            return Err(GpError::Empty);
        }
        if points.len() != outputs.len() {
            return Err(GpError::LengthMismatch);
        }
        if let Some(i) = outputs.iter().position(|y| !y.is_finite()) {
            return Err(GpError::NonFiniteOutput(i));
        }
        let y = DVector::from_vec(outputs);
        build_model(points, y, params, 0.0, 1.0)
    }

    fn fit_normalized(
        points: Vec<Vec<f64>>,
        y_norm: Vec<f64>,
        fixed_noise: Option<f64>,
        mean: f64,
        scale: f64,
    ) -> Result<Self, GpError> {
        let y = DVector::from_vec(y_norm);
        let (lengthscale, noise) = select_hyperparameters(&points, &y, fixed_noise);
        let params = KernelParams::new(lengthscale, 1.0, noise)?;
        build_model(points, y, params, mean, scale)
    }

    /// Posterior mean and variance at `x`, in normalized output units.
    /// Variance is clamped to `[0, k0]`.
    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64), GpError> {
        self.check_dim(x)?;
        let k = self.kernel_vector(x);
        let mean = self.alpha.dot(&k);
        let v = self.chol.l_dirty().solve_lower_triangular(&k).expect(
            "cholesky factor is invertible by construction",
        );
        let k0 = self.params.signal_ceiling;
        let var = (k0 - v.norm_squared()).clamp(0.0, k0);
        Ok((mean, var))
    }

    /// Analytic gradients of the posterior mean and variance at `x`.
    pub fn posterior_gradient(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>), GpError> {
        self.check_dim(x)?;
        let d = x.len();
        let k = self.kernel_vector(x);
        let w = self.chol.solve(&k);
        let inv_sq_ell = 1.0 / (self.params.lengthscale * self.params.lengthscale);
        let mut dmean = vec![0.0; d];
        let mut dvar = vec![0.0; d];
        for (i, xi) in self.train_inputs.iter().enumerate() {
            let ki = k[i];
            for j in 0..d {
                // d k(x, x_i) / d x_j = k(x, x_i) (x_{i,j} - x_j) / l^2
                let dk = ki * (xi[j] - x[j]) * inv_sq_ell;
                dmean[j] += self.alpha[i] * dk;
                dvar[j] -= 2.0 * w[i] * dk;
            }
        }
        Ok((dmean, dvar))
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn train_inputs(&self) -> &[Vec<f64>] {
        &self.train_inputs
    }

    pub fn train_len(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn dim(&self) -> usize {
        self.train_inputs[0].len()
    }

    /// (mean, scale) applied to raw outputs: `y_norm = (y - mean) / scale`.
    pub fn normalization(&self) -> (f64, f64) {
        (self.norm_mean, self.norm_scale)
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.norm_mean) / self.norm_scale
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.norm_scale + self.norm_mean
    }

    pub fn normalized_outputs(&self) -> &DVector<f64> {
        &self.normalized_outputs
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Jitter added to the diagonal (beyond the noise variance) to make the
    /// factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// The factorized matrix `K + (sigma_n^2 + jitter) I`.
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        covariance_matrix(
            &self.train_inputs,
            self.params,
            self.params.noise_variance + self.jitter,
        )
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GpError> {
        if x.len() != self.dim() {
            return Err(GpError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn kernel_vector(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.train_inputs.len(),
            self.train_inputs.iter().map(|xi| self.params.kernel(xi, x)),
        )
    }
}

/// z-score parameters with the degenerate-std fallback to scale 1.
fn normalization_of(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std < STD_FLOOR { 1.0 } else { std })
}

fn covariance_matrix(points: &[Vec<f64>], params: KernelParams, diag_add: f64) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.signal_ceiling + diag_add;
        for j in 0..i {
            let v = params.kernel(&points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `K + (noise + jitter) I`, escalating jitter by x10 from 1e-10 k0
/// up to 1e-2 k0 on failure.
fn factorize(
    points: &[Vec<f64>],
    params: KernelParams,
) -> Result<(Cholesky<f64, Dyn>, f64), GpError> {
    let k0 = params.signal_ceiling;
    let mut jitter = 0.0;
    loop {
        let k = covariance_matrix(points, params, params.noise_variance + jitter);
        if let Some(chol) = Cholesky::new(k) {
            return Ok((chol, jitter));
        }
        jitter = if jitter == 0.0 { 1e-10 * k0 } else { jitter * 10.0 };
        if jitter > 1e-2 * k0 {
            return Err(GpError::FactorizationFailed {
                max_jitter: 1e-2 * k0,
            });
        }
    }
}

fn build_model(
    points: Vec<Vec<f64>>,
    y: DVector<f64>,
    params: KernelParams,
    norm_mean: f64,
    norm_scale: f64,
) -> Result<GpModel, GpError> {
    let (chol, jitter) = factorize(&points, params)?;
    let alpha = chol.solve(&y);
    let lml = log_marginal(&chol, &y, &alpha);
    Ok(GpModel {
        params,
        train_inputs: points,
        normalized_outputs: y,
        alpha,
        chol,
        norm_mean,
        norm_scale,
        jitter,
        lml,
    })
}

fn log_marginal(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let log_det_half: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * y.dot(alpha) - log_det_half - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Median pairwise Euclidean distance; falls back to 1 when all points coincide.
fn median_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut dists = Vec::new();
    for i in 0..points.len() {
        for j in 0..i {
            let d: f64 = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d > 0.0 {
                dists.push(d);
            }
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    dists[dists.len() / 2]
}

const NOISE_FLOOR: f64 = 1e-8;
const NOISE_CAP: f64 = 10.0;

/// Maximizes the log marginal likelihood over log-lengthscale (and
/// log-noise-variance when not fixed): 8 log-spaced multi-starts over
/// [1e-2, 1e2] x median pairwise distance, coordinate pattern search,
/// then a factor-2 polish so the returned lengthscale beats its 0.5x and
/// 2x neighbors.
fn select_hyperparameters(
    points: &[Vec<f64>],
    y: &DVector<f64>,
    fixed_noise: Option<f64>,
) -> (f64, f64) {
    let scale = median_pairwise_distance(points);
    let ell_lo = (1e-2 * scale).ln();
    let ell_hi = (1e2 * scale).ln();
    // Refinement may step slightly past the start range.
    let ell_clamp = ((1e-4 * scale).ln(), (1e4 * scale).ln());
    let noise_clamp = (NOISE_FLOOR.ln(), NOISE_CAP.ln());

    let eval = |log_ell: f64, log_noise: f64| -> f64 {
        let params = KernelParams {
            lengthscale: log_ell.exp(),
            signal_ceiling: 1.0,
            noise_variance: fixed_noise.unwrap_or_else(|| log_noise.exp()),
        };
        match factorize(points, params) {
            Ok((chol, _)) => {
                let alpha = chol.solve(y);
                log_marginal(&chol, y, &alpha)
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };

    let n_starts = 8;
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for s in 0..n_starts {
        let frac = s as f64 / (n_starts - 1) as f64;
        let start_ell = ell_lo + frac * (ell_hi - ell_lo);
        let start_noise = 1e-2f64.ln();
        let (val, log_ell, log_noise) = pattern_search(
            &eval,
            start_ell,
            start_noise,
            fixed_noise.is_none(),
            ell_clamp,
            noise_clamp,
        );
        if val > best.0 {
            best = (val, log_ell, log_noise);
        }
    }

    // Polish: restart the descent whenever a factor-2 lengthscale jump still helps.
    for _ in 0..5 {
        let (val, log_ell, log_noise) = best;
        let up = eval(log_ell + std::f64::consts::LN_2, log_noise);
        let down = eval(log_ell - std::f64::consts::LN_2, log_noise);
        let (jump_val, jump_ell) = if up >= down {
            (up, log_ell + std::f64::consts::LN_2)
        } else {
            (down, log_ell - std::f64::consts::LN_2)
        };
        if jump_val <= val {
            break;
        }
        best = pattern_search(
            &eval,
            jump_ell,
            log_noise,
            fixed_noise.is_none(),
            ell_clamp,
            noise_clamp,
        );
    }

    let (_, log_ell, log_noise) = best;
    let noise = fixed_noise.unwrap_or_else(|| log_noise.exp().max(NOISE_FLOOR));
    (log_ell.exp(), noise)
}

/// Derivative-free coordinate descent in log-parameter space.
fn pattern_search(
    eval: &dyn Fn(f64, f64) -> f64,
    start_ell: f64,
    start_noise: f64,
    search_noise: bool,
    ell_clamp: (f64, f64),
    noise_clamp: (f64, f64),
) -> (f64, f64, f64) {
    let mut ell = start_ell.clamp(ell_clamp.0, ell_clamp.1);
    let mut noise = start_noise.clamp(noise_clamp.0, noise_clamp.1);
    let mut val = eval(ell, noise);
    let mut step = 0.7;
    while step > 1e-3 {
        let mut improved = false;
        for dir in [1.0, -1.0] {
            let cand = (ell + dir * step).clamp(ell_clamp.0, ell_clamp.1);
            let v = eval(cand, noise);
            if v > val {
                val = v;
                ell = cand;
                improved = true;
            }
        }
        if search_noise {
            for dir in [1.0, -1.0] {
                let cand = (noise + dir * step).clamp(noise_clamp.0, noise_clamp.1);
                let v = eval(ell, cand);
                if v > val {
                    val = v;
                    noise = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (val, ell, noise)
}
