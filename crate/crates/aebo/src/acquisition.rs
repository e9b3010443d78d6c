//! Expected improvement and its variants: the epsilon-offset form used by the
//! acquisition strategy and the feasibility-weighted form for constrained
//! problems.
//!
//! All quantities live in normalized output units under the maximization
//! convention. For strongly negative standardized improvement the direct
//! formula `sigma (u Phi(u) + phi(u))` cancels catastrophically; past
//! `u < -8` the value is rearranged through the Laplace continued fraction
//! for the Mills ratio, which keeps both the value and its logarithm accurate
//! so far-region candidates remain comparable.

use crate::gp::{GpError, GpModel};
use crate::stdnorm;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AcquisitionError {
    #[error("predictive std must be non-negative, got {0}")]
    NegativeStd(f64),
    #[error("feasibility probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("invalid acquisition context: {0}")]
    InvalidContext(&'static str),
    #[error(transparent)]
    Gp(#[from] GpError),
}

/// Per-iteration acquisition state: the incumbent, the minimum-improvement
/// offset, the variance-threshold coefficient, and (in constrained mode) the
/// feasibility predictor.
#[derive(Debug, Clone, Copy)]
pub struct AcquisitionContext<'a> {
    /// Current best observed value f' (normalized units, maximization).
    pub incumbent: f64,
    /// Minimum improvement parameter epsilon.
    pub epsilon: f64,
    /// Exploration coefficient tau in (0, 1).
    pub tau: f64,
    pub feasibility: Option<&'a FeasibilityModel>,
}

impl<'a> AcquisitionContext<'a> {
    pub fn new(
        incumbent: f64,
        epsilon: f64,
        tau: f64,
        feasibility: Option<&'a FeasibilityModel>,
    ) -> Result<Self, AcquisitionError> {
        if !incumbent.is_finite() {
            return Err(AcquisitionError::InvalidContext("incumbent must be finite"));
        }
        if epsilon < 0.0 || epsilon.is_nan() {
            return Err(AcquisitionError::InvalidContext("epsilon must be >= 0"));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(AcquisitionError::InvalidContext("tau must lie in (0, 1)"));
        }
        Ok(Self {
            incumbent,
            epsilon,
            tau,
            feasibility,
        })
    }

    /// Improvement target f' + epsilon.
    pub fn target(&self) -> f64 {
        self.incumbent + self.epsilon
    }
}

/// Switch to the continued-fraction tail below this standardized improvement.
const TAIL_CUTOFF: f64 = -8.0;
const CF_DEPTH: usize = 80;

/// `a_1` of the Laplace continued fraction for the Mills ratio at v > 0:
/// `Phi(-v)/phi(v) = 1 / (v + a_1)` with `a_1 = 1/(v + 2/(v + 3/(v + ...)))`.
fn mills_cf_a1(v: f64) -> f64 {
    let mut a = 0.0;
    for k in (2..=CF_DEPTH).rev() {
        a = k as f64 / (v + a);
    }
    1.0 / (v + a)
}

/// `h(u) = u Phi(u) + phi(u)`, the unit-variance expected improvement.
fn ei_h(u: f64) -> f64 {
    if u >= TAIL_CUTOFF {
        (u * stdnorm::cdf(u) + stdnorm::pdf(u)).max(0.0)
    } else {
        // h(u) = phi(u) * a1 / (v + a1) with v = -u; no cancellation
        let v = -u;
        let a1 = mills_cf_a1(v);
        stdnorm::pdf(u) * a1 / (v + a1)
    }
}

/// `ln h(u)`, finite for all finite u until phi(u) underflows.
pub(crate) fn ei_log_h(u: f64) -> f64 {
    if u >= TAIL_CUTOFF {
        ei_h(u).ln()
    } else {
        let v = -u;
        let a1 = mills_cf_a1(v);
        -0.5 * v * v - (2.0 * std::f64::consts::PI).ln() / 2.0 + a1.ln() - (v + a1).ln()
    }
}

/// `Phi(u) / h(u)`, the derivative ratio used by gradient-based refinement
/// (`d ln h / du = Phi(u)/h(u)`).
pub(crate) fn ei_cdf_over_h(u: f64) -> f64 {
    if u >= TAIL_CUTOFF {
        stdnorm::cdf(u) / ei_h(u)
    } else {
        1.0 / mills_cf_a1(-u)
    }
}

/// Hazard rate `phi(z) / Phi(z)`, stable for strongly negative z.
pub(crate) fn normal_hazard(z: f64) -> f64 {
    if z >= TAIL_CUTOFF {
        stdnorm::pdf(z) / stdnorm::cdf(z)
    } else {
        let v = -z;
        v + mills_cf_a1(v)
    }
}

/// Expected improvement over `f' + epsilon` at a Gaussian posterior
/// `(mean, std)`. At `std = 0` degenerates to `max(0, mean - (f'+epsilon))`.
pub fn expected_improvement(
    mean: f64,
    std: f64,
    ctx: &AcquisitionContext,
) -> Result<f64, AcquisitionError> {
    if std < 0.0 || std.is_nan() {
        return Err(AcquisitionError::NegativeStd(std));
    }
    let gap = mean - ctx.target();
    if std == 0.0 {
        return Ok(gap.max(0.0));
    }
    Ok(std * ei_h(gap / std))
}

/// Natural log of the expected improvement; `-inf` when the EI is exactly 0.
/// Stays finite deep into the tail where the EI itself underflows, so
/// far-region candidates can still be ranked.
pub fn log_expected_improvement(
    mean: f64,
    std: f64,
    ctx: &AcquisitionContext,
) -> Result<f64, AcquisitionError> {
    if std < 0.0 || std.is_nan() {
        return Err(AcquisitionError::NegativeStd(std));
    }
    let gap = mean - ctx.target();
    if std == 0.0 {
        return Ok(if gap > 0.0 { gap.ln() } else { f64::NEG_INFINITY });
    }
    Ok(std.ln() + ei_log_h(gap / std))
}

/// Feasibility-weighted acquisition: `EI * Pr(C)` with the admissibility rule
/// `Pr(C) >= 0.5`. Callers must reject inadmissible candidates.
pub fn constrained_acquisition(
    mean: f64,
    std: f64,
    ctx: &AcquisitionContext,
    p_feasible: f64,
) -> Result<(f64, bool), AcquisitionError> {
    if !(0.0..=1.0).contains(&p_feasible) {
        return Err(AcquisitionError::InvalidProbability(p_feasible));
    }
    let ei = expected_improvement(mean, std, ctx)?;
    Ok((ei * p_feasible, p_feasible >= 0.5))
}

/// Probabilistic predictor of constraint satisfaction: a GP regressed on
/// +1/-1 feasibility labels with a probit link. When the training labels are
/// not mixed the model degenerates to the constant 1.
#[derive(Debug, Clone)]
pub struct FeasibilityModel {
    inner: Option<GpModel>,
}

impl FeasibilityModel {
    /// Fits the label GP. With fewer than one feasible and one infeasible
    /// label, returns the degenerate constant-1 model.
    pub fn fit(points: &[Vec<f64>], labels: &[bool]) -> Result<Self, AcquisitionError> {
        if points.len() != labels.len() {
            return Err(GpError::LengthMismatch.into());
        }
        let any_feasible = labels.iter().any(|&l| l);
        let any_infeasible = labels.iter().any(|&l| !l);
        if !(any_feasible && any_infeasible) {
            return Ok(Self { inner: None });
        }
        let targets: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
        let inner = GpModel::fit_unnormalized(points.to_vec(), targets, Some(1e-6))?;
        Ok(Self { inner: Some(inner) })
    }

    pub fn degenerate() -> Self {
        Self { inner: None }
    }

    pub fn is_degenerate(&self) -> bool {
        self.inner.is_none()
    }

    /// Underlying label GP, when not degenerate.
    pub fn model(&self) -> Option<&GpModel> {
        self.inner.as_ref()
    }

    /// `Pr(C(x)) = Phi(mu_c(x) / sqrt(sigma_c^2(x) + 1))`.
    pub fn probability(&self, x: &[f64]) -> Result<f64, AcquisitionError> {
        let Some(model) = &self.inner else {
            return Ok(1.0);
        };
        let (mu, var) = model.posterior(x)?;
        let p = stdnorm::cdf(mu / (var + 1.0).sqrt());
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelParams;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(incumbent: f64, epsilon: f64) -> AcquisitionContext<'static> {
        AcquisitionContext::new(incumbent, epsilon, 0.5, None).unwrap()
    }

    /// Quadrature oracle for the integral form of the expected improvement.
    fn ei_quadrature(mean: f64, std: f64, target: f64) -> f64 {
        let lo = target;
        let hi = (mean + 12.0 * std).max(target + 12.0 * std);
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let density =
            |f: f64| (-0.5 * ((f - mean) / std).powi(2)).exp() / (std * (2.0 * std::f64::consts::PI).sqrt());
        let mut sum = 0.0;
        for i in 0..=n {
            let f = lo + i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            sum += w * (f - target) * density(f);
        }
        sum * h / 3.0
    }

    #[test]
    fn degenerate_std_cases() {
        let c = ctx(1.0, 0.2);
        assert!((expected_improvement(1.5, 0.0, &c).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(expected_improvement(1.0, 0.0, &c).unwrap(), 0.0);
    }

    #[test]
    fn at_target_mean_ei_is_sigma_phi_zero() {
        let c = ctx(0.7, 0.01);
        let ei = expected_improvement(0.71, 0.5, &c).unwrap();
        assert!((ei - 0.5 * stdnorm::INV_SQRT_2PI).abs() < 1e-12);
        assert!((ei - 0.19947).abs() < 1e-5);
    }

    #[test]
    fn unit_gap_matches_quadrature_oracle() {
        // mean - target = std = 1 => EI = Phi(1) + phi(1)
        let c = ctx(1.0, 0.0);
        let ei = expected_improvement(2.0, 1.0, &c).unwrap();
        let oracle = ei_quadrature(2.0, 1.0, 1.0);
        assert!((ei - oracle).abs() < 1e-9, "{ei} vs oracle {oracle}");
        assert!((ei - 1.0833154705876864).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_std() {
        let c = ctx(0.0, 0.0);
        assert!(matches!(
            expected_improvement(0.0, -1.0, &c),
            Err(AcquisitionError::NegativeStd(_))
        ));
    }

    #[test]
    fn monotone_in_mean_and_std() {
        // ranges chosen so the analytic derivatives (Phi(u) resp. phi(u))
        // stay large enough for strict inequality to be representable in f64
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = ctx(0.0, 0.01);
        for _ in 0..500 {
            let sigma = rng.gen_range(0.05..2.0);
            let m1 = rng.gen_range(-1.5..1.5);
            let m2 = m1 + rng.gen_range(0.01..2.0);
            let e1 = expected_improvement(m1, sigma, &c).unwrap();
            let e2 = expected_improvement(m2, sigma, &c).unwrap();
            assert!(e2 > e1, "EI not increasing in mean: {e1} !< {e2}");

            let mu = rng.gen_range(-2.0..0.2);
            let s1 = rng.gen_range(0.1..1.0);
            let s2 = s1 + rng.gen_range(0.05..1.0);
            let v1 = expected_improvement(mu, s1, &c).unwrap();
            let v2 = expected_improvement(mu, s2, &c).unwrap();
            assert!(v2 > v1, "EI not increasing in std: {v1} !< {v2}");
        }
    }

    #[test]
    fn non_negative_and_vanishing_for_low_mean() {
        let c = ctx(0.0, 0.0);
        for i in 0..60 {
            let mean = -(i as f64);
            let ei = expected_improvement(mean, 1.0, &c).unwrap();
            assert!(ei >= 0.0);
        }
        assert!(expected_improvement(-40.0, 1.0, &c).unwrap() < 1e-300);
    }

    #[test]
    fn tail_rearrangement_agrees_with_direct_formula() {
        let c = ctx(0.0, 0.0);
        // where both the direct form and the continued-fraction form are
        // representable they must agree to 1e-10 relative
        for i in 0..280 {
            let u = -8.01 - 0.1 * i as f64; // down to ~ -36
            let sigma = 0.7;
            let direct = sigma * (u * stdnorm::cdf(u) + stdnorm::pdf(u));
            let stable = expected_improvement(sigma * u, sigma, &c).unwrap();
            let rel = (stable - direct).abs() / direct;
            assert!(rel < 1e-10, "u={u}: stable {stable} direct {direct} rel {rel}");
            let log_stable = log_expected_improvement(sigma * u, sigma, &c).unwrap();
            let rel_log = (log_stable.exp() - direct).abs() / direct;
            assert!(rel_log < 1e-10, "u={u}: log-form rel {rel_log}");
        }
    }

    #[test]
    fn log_form_stays_finite_past_underflow() {
        let c = ctx(0.0, 0.0);
        let ei = expected_improvement(-45.0, 1.0, &c).unwrap();
        assert_eq!(ei, 0.0); // underflows
        let log_ei = log_expected_improvement(-45.0, 1.0, &c).unwrap();
        assert!(log_ei.is_finite());
        // ordering survives: closer candidate has larger log EI
        let log_closer = log_expected_improvement(-44.0, 1.0, &c).unwrap();
        assert!(log_closer > log_ei);
    }

    #[test]
    fn cdf_over_h_matches_ratio() {
        for &u in &[-12.0, -9.0, -7.0, -2.0, 0.0, 1.5] {
            let r = ei_cdf_over_h(u);
            let direct = stdnorm::cdf(u) / (u * stdnorm::cdf(u) + stdnorm::pdf(u));
            assert!((r - direct).abs() / direct.abs() < 1e-9, "u={u}: {r} vs {direct}");
        }
    }

    #[test]
    fn constrained_acquisition_rules() {
        let c = ctx(0.0, 0.0);
        let ei = expected_improvement(0.5, 1.0, &c).unwrap();
        let (v, ok) = constrained_acquisition(0.5, 1.0, &c, 1.0).unwrap();
        assert_eq!(v, ei);
        assert!(ok);
        let (_, ok) = constrained_acquisition(0.5, 1.0, &c, 0.4).unwrap();
        assert!(!ok);
        let (_, ok) = constrained_acquisition(0.5, 1.0, &c, 0.5).unwrap();
        assert!(ok);
        assert!(constrained_acquisition(0.5, 1.0, &c, 1.2).is_err());
    }

    #[test]
    fn feasibility_degenerates_without_negative_evidence() {
        let pts = vec![vec![0.0], vec![1.0]];
        let fm = FeasibilityModel::fit(&pts, &[true, true]).unwrap();
        assert!(fm.is_degenerate());
        assert_eq!(fm.probability(&[5.0]).unwrap(), 1.0);
    }

    #[test]
    fn feasibility_reverts_to_half_far_from_data() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let fm = FeasibilityModel::fit(&pts, &[true, true, false, false]).unwrap();
        let p = fm.probability(&[1e7]).unwrap();
        assert!((p - 0.5).abs() < 1e-9, "far-field probability {p}");
    }

    #[test]
    fn feasibility_near_one_sigma_at_certain_point() {
        // direct-evaluation oracle: sigma_c^2 ~ 0 at a training point, so
        // Pr = Phi(label / sqrt(0 + 1)) = Phi(1)
        let pts = vec![vec![0.0], vec![10.0], vec![20.0], vec![30.0]];
        let fm = FeasibilityModel::fit(&pts, &[true, true, false, false]).unwrap();
        let p = fm.probability(&[0.0]).unwrap();
        assert!((p - stdnorm::cdf(1.0)).abs() < 2e-3, "p = {p}");
        assert!((p - 0.8413447460685429).abs() < 2e-3);
    }

    #[test]
    fn feasibility_probabilities_stay_in_open_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
            .collect();
        let labels: Vec<bool> = (0..12).map(|i| i % 3 != 0).collect();
        let fm = FeasibilityModel::fit(&pts, &labels).unwrap();
        for _ in 0..100 {
            let x = vec![rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            let p = fm.probability(&x).unwrap();
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn feasibility_model_reuses_gp_posterior() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let fm = FeasibilityModel::fit(&pts, &[true, false, false]).unwrap();
        let model = fm.model().unwrap();
        let (mu, var) = model.posterior(&[0.0]).unwrap();
        let expected = stdnorm::cdf(mu / (var + 1.0).sqrt());
        assert_eq!(fm.probability(&[0.0]).unwrap(), expected);
        // label GP regresses on raw +-1 targets
        let _ = KernelParams::new(model.params().lengthscale, 1.0, 1e-6).unwrap();
        assert_eq!(model.normalization(), (0.0, 1.0));
    }
}
