//! Adaptive exploration-exploitation control.
//!
//! Each iteration the room-for-improvement threshold xi is annealed, the
//! exploitation-trigger std bound sigma_0 and the EI floor EI_0 are computed
//! from it, and the variance-threshold coefficient tau is obtained by root
//! finding: the expected improvement on the low-uncertainty boundary
//! (evaluated at the boundary mean mu_m) is pinned to EI_0, so exploration
//! never out-promises what exploitation near the incumbent can still deliver.

use crate::acquisition::AcquisitionContext;
use crate::stdnorm;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("kappa must lie in (0, 0.5), got {0}")]
    InvalidKappa(f64),
    #[error("delta must be a small positive real, got {0}")]
    InvalidDelta(f64),
    #[error("xi must be non-negative, got {0}")]
    InvalidXi(f64),
    #[error("tau bracket must satisfy 0 < tau_min < tau_max < 1, got [{0}, {1}]")]
    InvalidTauBracket(f64, f64),
    #[error("incumbent must be finite, got {0}")]
    NonFiniteIncumbent(f64),
    #[error("EI floor must be positive, got {0}")]
    InvalidEiFloor(f64),
}

/// Knobs of the adaptive trade-off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlParams {
    /// Initial room-for-improvement threshold xi_0 (normalized units).
    pub xi0: f64,
    /// Improvement-probability slack kappa in (0, 0.5).
    pub kappa: f64,
    /// Incumbent-neighborhood mean gap delta = f' - mu_+.
    pub delta: f64,
    /// Boundary max mean; the prior mean 0 under output normalization.
    pub mu_m: f64,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            xi0: 0.1,
            kappa: 0.1,
            delta: 0.01,
            mu_m: 0.0,
            tau_min: 1e-4,
            tau_max: 0.999,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<(), ControlError> {
        if !(self.kappa > 0.0 && self.kappa < 0.5) {
            return Err(ControlError::InvalidKappa(self.kappa));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(ControlError::InvalidDelta(self.delta));
        }
        if !(self.xi0 >= 0.0 && self.xi0.is_finite()) {
            return Err(ControlError::InvalidXi(self.xi0));
        }
        if !(self.tau_min > 0.0 && self.tau_min < self.tau_max && self.tau_max < 1.0) {
            return Err(ControlError::InvalidTauBracket(self.tau_min, self.tau_max));
        }
        Ok(())
    }
}

/// Linear annealing of xi from `xi0` at `start_iteration` down to 0 at
/// `end_iteration`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub start_iteration: usize,
    pub end_iteration: usize,
    pub xi0: f64,
}

/// xi(t) = xi0 * max(0, (end - t) / (end - start)); clamped outside the window.
pub fn anneal_xi(schedule: &AnnealSchedule, t: usize) -> f64 {
    let AnnealSchedule {
        start_iteration: start,
        end_iteration: end,
        xi0,
    } = *schedule;
    if t >= end || end <= start {
        return 0.0;
    }
    if t <= start {
        return xi0;
    }
    xi0 * (end - t) as f64 / (end - start) as f64
}

/// `sigma_0 = (xi + delta) / Phi^-1(1 - kappa)`: exploitation near the
/// incumbent is only warranted while its predictive std exceeds this.
pub fn sigma_zero(xi: f64, params: &ControlParams) -> Result<f64, ControlError> {
    if xi < 0.0 || xi.is_nan() {
        return Err(ControlError::InvalidXi(xi));
    }
    let q = stdnorm::quantile(1.0 - params.kappa);
    if q <= 0.0 || q.is_nan() {
        return Err(ControlError::InvalidKappa(params.kappa));
    }
    if params.delta <= 0.0 || params.delta.is_nan() {
        return Err(ControlError::InvalidDelta(params.delta));
    }
    Ok((xi + params.delta) / q)
}

/// `EI_0 = -delta Phi(-delta/sigma_0) + sigma_0 phi(-delta/sigma_0)`, the
/// expected improvement still available near the incumbent when exploitation
/// is warranted.
pub fn ei_floor(sigma0: f64, delta: f64) -> f64 {
    let u = -delta / sigma0;
    -delta * stdnorm::cdf(u) + sigma0 * stdnorm::pdf(u)
}

/// Expected improvement on the boundary as a function of tau, evaluated at
/// the boundary mean `mu_m`: the left side of the tau equation.
pub fn boundary_ei(tau: f64, f_prime: f64, k0: f64, mu_m: f64) -> f64 {
    let ctx = AcquisitionContext::new(f_prime, 0.0, 0.5, None)
        .expect("finite incumbent with zero epsilon is always a valid context");
    crate::acquisition::expected_improvement(mu_m, (tau * k0).sqrt(), &ctx)
        .expect("non-negative std by construction")
}

/// Solves `boundary_ei(tau) = ei0` for tau by bisection on
/// `[tau_min, tau_max]`; the left side is strictly increasing in tau, so the
/// root is unique. When no root lies in the bracket, returns the endpoint
/// whose value is nearest `ei0`.
pub fn solve_tau(
    f_prime: f64,
    k0: f64,
    ei0: f64,
    params: &ControlParams,
) -> Result<f64, ControlError> {
    if !f_prime.is_finite() {
        return Err(ControlError::NonFiniteIncumbent(f_prime));
    }
    if ei0 <= 0.0 || !ei0.is_finite() {
        return Err(ControlError::InvalidEiFloor(ei0));
    }
    params.validate()?;
    let g = |tau: f64| boundary_ei(tau, f_prime, k0, params.mu_m);
    let (mut lo, mut hi) = (params.tau_min, params.tau_max);
    if g(lo) >= ei0 {
        return Ok(lo);
    }
    if g(hi) <= ei0 {
        return Ok(hi);
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < ei0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ControlParams {
        ControlParams::default()
    }

    #[test]
    fn default_params_validate() {
        assert!(params().validate().is_ok());
        let bad = ControlParams {
            kappa: 0.6,
            ..params()
        };
        assert!(matches!(bad.validate(), Err(ControlError::InvalidKappa(_))));
    }

    #[test]
    fn sigma_zero_matches_quantile_oracle() {
        // Phi^-1(0.9) = 1.2815515655446004
        let p = params();
        let s0 = sigma_zero(0.0, &p).unwrap();
        assert!((s0 - 0.007803041460723792).abs() < 1e-12, "s0 = {s0}");
        let s1 = sigma_zero(0.1, &p).unwrap();
        assert!((s1 - 0.08583345606796171).abs() < 1e-12, "s1 = {s1}");
    }

    #[test]
    fn sigma_zero_is_linear_in_xi_plus_delta() {
        let p = params();
        let a = sigma_zero(0.03, &p).unwrap(); // xi + delta = 0.04
        let b = sigma_zero(0.07, &p).unwrap(); // xi + delta = 0.08
        assert!((b - 2.0 * a).abs() < 1e-15);
    }

    #[test]
    fn sigma_zero_rejects_bad_kappa() {
        let p = ControlParams {
            kappa: 0.5,
            ..params()
        };
        assert!(matches!(
            sigma_zero(0.0, &p),
            Err(ControlError::InvalidKappa(_))
        ));
    }

    #[test]
    fn ei_floor_values() {
        // frozen from a high-precision Phi/phi oracle
        let s0 = sigma_zero(0.1, &params()).unwrap();
        let e = ei_floor(s0, 0.01);
        assert!((e - 0.029474725421208388).abs() < 1e-12, "EI0 = {e}");
        let e11 = ei_floor(1.0, 1.0);
        assert!((e11 - 0.08331547058768629).abs() < 1e-12, "EI0(1,1) = {e11}");
    }

    #[test]
    fn ei_floor_limit_and_positivity() {
        assert!(ei_floor(1e-12, 0.01) < 1e-15);
        for &(s, d) in &[(0.01, 0.01), (0.5, 0.2), (2.0, 1e-3)] {
            assert!(ei_floor(s, d) > 0.0);
        }
    }

    #[test]
    fn solve_tau_closed_form_at_boundary_mean() {
        // mu_m = f' makes g(tau) = sqrt(tau k0) phi(0); tau = (EI0 / phi(0))^2
        let p = ControlParams {
            mu_m: 0.37,
            ..params()
        };
        let tau = solve_tau(0.37, 1.0, 0.05, &p).unwrap();
        assert!((tau - 0.015707963267948963).abs() < 1e-8, "tau = {tau}");
        let resid = (boundary_ei(tau, 0.37, 1.0, p.mu_m) - 0.05).abs();
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn solve_tau_clamps_to_endpoints() {
        let p = params();
        // incumbent far above mu_m: even tau_max cannot reach the floor
        let tau = solve_tau(8.0, 1.0, 0.05, &p).unwrap();
        assert_eq!(tau, p.tau_max);
        // enormous floor demand vs tiny boundary EI at tau_min
        let tau = solve_tau(-5.0, 1.0, 1e-9, &p).unwrap();
        assert_eq!(tau, p.tau_min);
    }

    #[test]
    fn solve_tau_rejects_bad_inputs() {
        let p = params();
        assert!(matches!(
            solve_tau(f64::NAN, 1.0, 0.05, &p),
            Err(ControlError::NonFiniteIncumbent(_))
        ));
        assert!(matches!(
            solve_tau(0.0, 1.0, 0.0, &p),
            Err(ControlError::InvalidEiFloor(_))
        ));
    }

    #[test]
    fn boundary_ei_is_strictly_increasing_in_tau() {
        let p = params();
        for &f_prime in &[0.3, 1.0, 2.5] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..100 {
                let tau = p.tau_min + (p.tau_max - p.tau_min) * i as f64 / 99.0;
                let g = boundary_ei(tau, f_prime, 1.0, p.mu_m);
                assert!(g > prev, "g not increasing at tau={tau} (f'={f_prime})");
                prev = g;
            }
        }
    }

    #[test]
    fn solve_tau_residual_small_whenever_unclamped() {
        let p = params();
        for i in 0..100 {
            let f_prime = 0.1 + 3.0 * i as f64 / 99.0;
            let g_lo = boundary_ei(p.tau_min, f_prime, 1.0, p.mu_m);
            let g_hi = boundary_ei(p.tau_max, f_prime, 1.0, p.mu_m);
            let ei0 = g_lo + (g_hi - g_lo) * 0.37;
            if ei0 <= 0.0 {
                continue;
            }
            let tau = solve_tau(f_prime, 1.0, ei0, &p).unwrap();
            let resid = (boundary_ei(tau, f_prime, 1.0, p.mu_m) - ei0).abs();
            assert!(resid < 1e-10, "f'={f_prime}: residual {resid}");
        }
    }

    #[test]
    fn anneal_endpoints_and_midpoint() {
        let s = AnnealSchedule {
            start_iteration: 11,
            end_iteration: 51,
            xi0: 0.1,
        };
        assert_eq!(anneal_xi(&s, 11), 0.1);
        assert_eq!(anneal_xi(&s, 51), 0.0);
        assert!((anneal_xi(&s, 31) - 0.05).abs() < 1e-15);
        // degenerate window
        let d = AnnealSchedule {
            start_iteration: 5,
            end_iteration: 5,
            xi0: 0.1,
        };
        assert_eq!(anneal_xi(&d, 5), 0.0);
    }

    #[test]
    fn more_exploration_earlier() {
        // increasing xi increases sigma_0, EI_0 and (unclamped) tau
        let p = params();
        let mut prev_tau = 0.0;
        let mut prev_s0 = 0.0;
        let mut prev_ei0 = 0.0;
        for i in 0..5 {
            let xi = 0.02 * i as f64;
            let s0 = sigma_zero(xi, &p).unwrap();
            let ei0 = ei_floor(s0, p.delta);
            let tau = solve_tau(1.2, 1.0, ei0, &p).unwrap();
            if i > 0 {
                assert!(s0 > prev_s0);
                assert!(ei0 > prev_ei0);
                assert!(tau > prev_tau, "tau {tau} !> {prev_tau} at xi={xi}");
            }
            prev_s0 = s0;
            prev_ei0 = ei0;
            prev_tau = tau;
        }
    }
}
