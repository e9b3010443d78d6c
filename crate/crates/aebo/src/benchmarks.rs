//! Synthetic test problems, the constrained variant, the observation-noise
//! wrapper, and the run metrics (optimality gap, distance-to-center).
//!
//! Function definitions and original bounds follow the standard
//! global-optimization forms; each problem self-validates its stored minimum
//! against its minimizer when constructed.

use crate::optimizer::{BlackBox, Bounds, EvalError, Evaluation, RunRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown problem '{0}'; known problems: {1}")]
    UnknownProblem(String, String),
    #[error("problem '{name}' requires dimension {expected}, got {got}")]
    DimensionMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("problem '{name}' failed self-validation: f(x*) = {got}, expected {expected}")]
    SelfValidation {
        name: String,
        got: f64,
        expected: f64,
    },
    #[error("run record has no best point")]
    NoBestPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Branin,
    SixHumpCamel,
    Beale,
    Hartmann3,
    Hartmann6,
    Rastrigin,
    Rosenbrock,
    ConstrainedRastrigin,
}

/// A benchmark objective (minimization) with its original bounds, known
/// minimum, and optional constraint indicator.
#[derive(Debug, Clone)]
pub struct TestProblem {
    name: String,
    dim: usize,
    original_bounds: Bounds,
    kind: Kind,
    y_opt: f64,
    minimizers: Vec<Vec<f64>>,
}

pub const REGISTRY: &[&str] = &[
    "branin",
    "six_hump_camel",
    "beale",
    "hartmann3",
    "hartmann6",
    "rastrigin",
    "rosenbrock",
    "constrained_rastrigin",
];

impl TestProblem {
    /// Looks a problem up by name. `dim` selects the dimension for the
    /// families defined for any d (rastrigin, rosenbrock; default 2) and is
    /// rejected when it contradicts a fixed-dimension problem.
    pub fn by_name(name: &str, dim: Option<usize>) -> Result<Self, BenchError> {
        let (kind, d, bounds, y_opt, minimizers): (Kind, usize, (f64, f64), f64, Vec<Vec<f64>>) =
            match name {
                "branin" => (
                    Kind::Branin,
                    2,
                    (0.0, 0.0),
                    0.3978873577297382,
                    vec![
                        vec![-PI, 12.275],
                        vec![PI, 2.275],
                        vec![9.424777966481027, 2.474999993650074],
                    ],
                ),
                "six_hump_camel" => (
                    Kind::SixHumpCamel,
                    2,
                    (0.0, 0.0),
                    -1.0316284534898774,
                    vec![
                        vec![0.08984200893527233, -0.712656403019058],
                        vec![-0.08984200893527233, 0.712656403019058],
                    ],
                ),
                "beale" => (Kind::Beale, 2, (0.0, 0.0), 0.0, vec![vec![3.0, 0.5]]),
                "hartmann3" => (
                    Kind::Hartmann3,
                    3,
                    (0.0, 0.0),
                    -3.862_779_787_332_663,
                    vec![vec![0.1145888690854106, 0.5556488928322367, 0.8525469854282611]],
                ),
                "hartmann6" => (
                    Kind::Hartmann6,
                    6,
                    (0.0, 0.0),
                    -3.322_368_011_415_515,
                    vec![vec![
                        0.20168951209481,
                        0.150010692776852,
                        0.476873971833793,
                        0.275332431065528,
                        0.3116516179851896,
                        0.657300535855056,
                    ]],
                ),
                "rastrigin" => {
                    let d = dim.unwrap_or(2);
                    (Kind::Rastrigin, d, (0.0, 0.0), 0.0, vec![vec![0.0; d]])
                }
                "rosenbrock" => {
                    let d = dim.unwrap_or(2);
                    (Kind::Rosenbrock, d, (0.0, 0.0), 0.0, vec![vec![1.0; d]])
                }
                "constrained_rastrigin" => (
                    Kind::ConstrainedRastrigin,
                    2,
                    (0.0, 0.0),
                    // rastrigin minimum over the ellipse 0.01 x1^2 + (x2+2)^2 <= 1
                    // sits on the boundary at (0, -1), value exactly 1
                    1.0,
                    vec![vec![0.0, -1.0]],
                ),
                other => {
                    return Err(BenchError::UnknownProblem(
                        other.to_string(),
                        REGISTRY.join(", "),
                    ))
                }
            };
        let _ = bounds;
        if let Some(requested) = dim {
            if requested != d {
                return Err(BenchError::DimensionMismatch {
                    name: name.to_string(),
                    expected: d,
                    got: requested,
                });
            }
        }
        let original_bounds = match kind {
            Kind::Branin => Bounds::new(vec![-5.0, 0.0], vec![10.0, 15.0]),
            Kind::SixHumpCamel => Bounds::new(vec![-3.0, -2.0], vec![3.0, 2.0]),
            Kind::Beale => Bounds::new(vec![-4.5, -4.5], vec![4.5, 4.5]),
            Kind::Hartmann3 => Bounds::new(vec![0.0; 3], vec![1.0; 3]),
            Kind::Hartmann6 => Bounds::new(vec![0.0; 6], vec![1.0; 6]),
            Kind::Rastrigin | Kind::ConstrainedRastrigin => {
                Bounds::new(vec![-5.12; d], vec![5.12; d])
            }
            Kind::Rosenbrock => Bounds::new(vec![-5.0; d], vec![10.0; d]),
        }
        .expect("registry bounds are well-formed");

        let problem = Self {
            name: name.to_string(),
            dim: d,
            original_bounds,
            kind,
            y_opt,
            minimizers,
        };
        problem.self_validate()?;
        Ok(problem)
    }

    fn self_validate(&self) -> Result<(), BenchError> {
        for m in &self.minimizers {
            let got = self.evaluate(m)?;
            if (got - self.y_opt).abs() > 1e-6 {
                return Err(BenchError::SelfValidation {
                    name: self.name.clone(),
                    got,
                    expected: self.y_opt,
                });
            }
            if !self.original_bounds.contains(m) {
                return Err(BenchError::SelfValidation {
                    name: self.name.clone(),
                    got: f64::NAN,
                    expected: self.y_opt,
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn original_bounds(&self) -> &Bounds {
        &self.original_bounds
    }

    pub fn known_minimum(&self) -> f64 {
        self.y_opt
    }

    pub fn minimizers(&self) -> &[Vec<f64>] {
        &self.minimizers
    }

    pub fn is_constrained(&self) -> bool {
        matches!(self.kind, Kind::ConstrainedRastrigin)
    }

    /// Objective value of the standard formula (total on all of R^d).
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, BenchError> {
        if x.len() != self.dim {
            return Err(BenchError::DimensionMismatch {
                name: self.name.clone(),
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(match self.kind {
            Kind::Branin => branin(x),
            Kind::SixHumpCamel => six_hump_camel(x),
            Kind::Beale => beale(x),
            Kind::Hartmann3 => hartmann3(x),
            Kind::Hartmann6 => hartmann6(x),
            Kind::Rastrigin | Kind::ConstrainedRastrigin => rastrigin(x),
            Kind::Rosenbrock => rosenbrock(x),
        })
    }

    /// Constraint indicator; always true for unconstrained problems.
    pub fn constraint_satisfied(&self, x: &[f64]) -> bool {
        match self.kind {
            Kind::ConstrainedRastrigin => in_rastrigin_ellipse(x),
            _ => true,
        }
    }
}

fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

fn six_hump_camel(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    (4.0 - 2.1 * x1 * x1 + x1.powi(4) / 3.0) * x1 * x1
        + x1 * x2
        + (-4.0 + 4.0 * x2 * x2) * x2 * x2
}

fn beale(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    (1.5 - x1 + x1 * x2).powi(2)
        + (2.25 - x1 + x1 * x2 * x2).powi(2)
        + (2.625 - x1 + x1 * x2 * x2 * x2).powi(2)
}

fn hartmann3(x: &[f64]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 3]; 4] = [
        [3.0, 10.0, 30.0],
        [0.1, 10.0, 35.0],
        [3.0, 10.0, 30.0],
        [0.1, 10.0, 35.0],
    ];
    const P: [[f64; 3]; 4] = [
        [0.3689, 0.1170, 0.2673],
        [0.4699, 0.4387, 0.7470],
        [0.1091, 0.8732, 0.5547],
        [0.0381, 0.5743, 0.8828],
    ];
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..3).map(|j| A[i][j] * (x[j] - P[i][j]).powi(2)).sum();
            ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

fn hartmann6(x: &[f64]) -> f64 {
    const ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
    const A: [[f64; 6]; 4] = [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ];
    const P: [[f64; 6]; 4] = [
        [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
        [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
        [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
        [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
    ];
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..6).map(|j| A[i][j] * (x[j] - P[i][j]).powi(2)).sum();
            ALPHA[i] * (-inner).exp()
        })
        .sum::<f64>()
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|xi| xi * xi - 10.0 * (2.0 * PI * xi).cos())
            .sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

fn in_rastrigin_ellipse(x: &[f64]) -> bool {
    0.01 * x[0] * x[0] + (x[1] + 2.0) * (x[1] + 2.0) <= 1.0
}

/// Registry-backed evaluation; the dimension is taken from `x`.
pub fn evaluate_problem(name: &str, x: &[f64]) -> Result<f64, BenchError> {
    let problem = TestProblem::by_name(name, Some(x.len()))?;
    problem.evaluate(x)
}

/// Rastrigin objective with the elliptical feasible domain
/// `0.01 x1^2 + (x2 + 2)^2 <= 1`.
pub fn constrained_rastrigin(x: &[f64]) -> Result<(f64, bool), BenchError> {
    if x.len() != 2 {
        return Err(BenchError::DimensionMismatch {
            name: "constrained_rastrigin".into(),
            expected: 2,
            got: x.len(),
        });
    }
    Ok((rastrigin(x), in_rastrigin_ellipse(x)))
}

/// Adapts a [`TestProblem`] to the optimizer's black-box interface.
#[derive(Debug, Clone)]
pub struct ProblemBlackBox {
    problem: TestProblem,
}

impl ProblemBlackBox {
    pub fn new(problem: TestProblem) -> Self {
        Self { problem }
    }

    pub fn problem(&self) -> &TestProblem {
        &self.problem
    }
}

impl BlackBox for ProblemBlackBox {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation, EvalError> {
        let y = self
            .problem
            .evaluate(x)
            .map_err(|e| EvalError(e.to_string()))?;
        Ok(Evaluation {
            y: Some(y),
            feasible: self.problem.constraint_satisfied(x),
        })
    }
}

/// Adds Gaussian observation noise on top of another black box; the
/// underlying objective is untouched, so noise-free metrics can be
/// recomputed from the evaluated points.
pub struct NoisyBlackBox<B> {
    inner: B,
    noise: Normal<f64>,
    rng: ChaCha20Rng,
}

impl<B: BlackBox> NoisyBlackBox<B> {
    pub fn new(inner: B, sigma: f64, seed: u64) -> Self {
        Self {
            inner,
            noise: Normal::new(0.0, sigma).expect("sigma must be non-negative and finite"),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }
}

impl<B: BlackBox> BlackBox for NoisyBlackBox<B> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation, EvalError> {
        let eval = self.inner.evaluate(x)?;
        Ok(Evaluation {
            y: eval.y.map(|y| y + self.noise.sample(&mut self.rng)),
            feasible: eval.feasible,
        })
    }
}

/// Optimality gap and reachability of a completed run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSample {
    /// `e = y_sol - y_opt` with `y_sol` the best noise-free value of the
    /// evaluated points (feasible ones only for constrained problems).
    pub optimality_gap: f64,
    /// `s = ||x* - c||_2` from the returned best point to the center `c`.
    pub distance_to_center: f64,
}

pub fn metrics(
    record: &RunRecord,
    problem: &TestProblem,
    center: &[f64],
) -> Result<MetricSample, BenchError> {
    let mut best = f64::INFINITY;
    for row in &record.rows {
        if problem.is_constrained() && !row.feasible {
            continue;
        }
        best = best.min(problem.evaluate(&row.x)?);
    }
    let best_x = record.best_x.as_ref().ok_or(BenchError::NoBestPoint)?;
    let s = best_x
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(MetricSample {
        optimality_gap: best - problem.known_minimum(),
        distance_to_center: s,
    })
}

/// Per-dimension window `[lo + 0.1 (hi - lo), lo + 0.3 (hi - lo)]` of `bounds`,
/// with dimensions flipped to the mirrored window `[hi - 0.3 r, hi - 0.1 r]`
/// until no excluded point lies inside the box.
pub fn window_excluding(bounds: &Bounds, excluded: &[Vec<f64>]) -> Bounds {
    let d = bounds.dim();
    let mut flipped = vec![false; d];
    loop {
        let window = build_window(bounds, &flipped);
        match excluded.iter().find(|m| window.contains(m)) {
            None => return window,
            Some(inside) => {
                // flip the first dimension that can push this point out
                let mut progressed = false;
                for j in 0..d {
                    if !flipped[j]
                        && inside[j] >= window.lower[j]
                        && inside[j] <= window.upper[j]
                    {
                        flipped[j] = true;
                        progressed = true;
                        break;
                    }
                }
                if !progressed {
                    // every containing dimension already flipped; give up and
                    // return the current window
                    return window;
                }
            }
        }
    }
}

fn build_window(bounds: &Bounds, flipped: &[bool]) -> Bounds {
    let mut lower = Vec::with_capacity(bounds.dim());
    let mut upper = Vec::with_capacity(bounds.dim());
    for (j, &flip) in flipped.iter().enumerate() {
        let range = bounds.upper[j] - bounds.lower[j];
        if flip {
            lower.push(bounds.upper[j] - 0.3 * range);
            upper.push(bounds.upper[j] - 0.1 * range);
        } else {
            lower.push(bounds.lower[j] + 0.1 * range);
            upper.push(bounds.lower[j] + 0.3 * range);
        }
    }
    Bounds::new(lower, upper).expect("windows of valid bounds are valid")
}

/// The 10-30% initial window of the problem's original bounds, guaranteed not
/// to contain any known minimizer.
pub fn initial_window(problem: &TestProblem) -> Bounds {
    window_excluding(problem.original_bounds(), problem.minimizers())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_problems_self_validate() {
        for name in REGISTRY {
            let p = TestProblem::by_name(name, None).unwrap();
            for m in p.minimizers() {
                assert!((p.evaluate(m).unwrap() - p.known_minimum()).abs() < 1e-6);
                assert!(p.original_bounds().contains(m));
            }
        }
    }

    #[test]
    fn known_global_minima() {
        assert_eq!(evaluate_problem("rastrigin", &[0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(evaluate_problem("rosenbrock", &[1.0, 1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(evaluate_problem("beale", &[3.0, 0.5]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn branin_minimum_matches_dense_grid() {
        // cross-check the formula constants: grid search over the original
        // bounds must reproduce the known minimum
        let p = TestProblem::by_name("branin", None).unwrap();
        let b = p.original_bounds();
        let mut best = f64::INFINITY;
        for i in 0..400 {
            for j in 0..400 {
                let x = [
                    b.lower[0] + (b.upper[0] - b.lower[0]) * i as f64 / 399.0,
                    b.lower[1] + (b.upper[1] - b.lower[1]) * j as f64 / 399.0,
                ];
                best = best.min(p.evaluate(&x).unwrap());
            }
        }
        assert!(
            (best - p.known_minimum()).abs() < 1e-4 * 10.0,
            "grid best {best} vs known {}",
            p.known_minimum()
        );
        assert!((p.known_minimum() - 0.397887).abs() < 1e-6);
    }

    #[test]
    fn unknown_problem_lists_registry() {
        let err = TestProblem::by_name("nope", None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("branin") && msg.contains("rosenbrock"));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(matches!(
            evaluate_problem("branin", &[0.0, 0.0, 0.0]),
            Err(BenchError::DimensionMismatch { .. })
        ));
        assert!(TestProblem::by_name("hartmann6", Some(3)).is_err());
        assert!(TestProblem::by_name("rastrigin", Some(4)).is_ok());
    }

    #[test]
    fn constrained_rastrigin_examples() {
        let (y, feasible) = constrained_rastrigin(&[0.0, -2.0]).unwrap();
        assert!(feasible, "ellipse center must be feasible");
        assert!((y - 4.0).abs() < 1e-12); // rastrigin(0, -2) = 4
        let (_, feasible) = constrained_rastrigin(&[0.0, 0.0]).unwrap();
        assert!(!feasible, "origin is outside the ellipse");
        let (_, feasible) = constrained_rastrigin(&[10.0, -2.0]).unwrap();
        assert!(feasible, "boundary point 0.01*100 + 0 = 1 is feasible");
    }

    #[test]
    fn constrained_minimum_matches_ellipse_scan() {
        // brute-force scan of the feasible ellipse
        let p = TestProblem::by_name("constrained_rastrigin", None).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..2001 {
            let x1 = -10.0 + 20.0 * i as f64 / 2000.0;
            let margin = 1.0 - 0.01 * x1 * x1;
            if margin < 0.0 {
                continue;
            }
            let half = margin.sqrt();
            for j in 0..401 {
                let x2 = -2.0 - half + 2.0 * half * j as f64 / 400.0;
                best = best.min(p.evaluate(&[x1, x2]).unwrap());
            }
        }
        assert!((best - p.known_minimum()).abs() < 1e-2, "scan best {best}");
    }

    #[test]
    fn noise_wrapper_statistics() {
        let p = TestProblem::by_name("branin", None).unwrap();
        let x = vec![1.0, 2.0];
        let clean = p.evaluate(&x).unwrap();

        let mut zero = NoisyBlackBox::new(ProblemBlackBox::new(p.clone()), 0.0, 1);
        assert_eq!(zero.evaluate(&x).unwrap().y.unwrap(), clean);

        let mut noisy = NoisyBlackBox::new(ProblemBlackBox::new(p), 0.1, 1);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| noisy.evaluate(&x).unwrap().y.unwrap() - clean)
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let std = (draws.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
            / draws.len() as f64)
            .sqrt();
        assert!(mean.abs() < 0.01, "noise mean {mean}");
        assert!((std - 0.1).abs() < 0.005, "noise std {std}");
    }

    #[test]
    fn metric_examples() {
        use crate::optimizer::IterationRow;
        let p = TestProblem::by_name("rastrigin", Some(2)).unwrap();
        let row = |x: Vec<f64>, y: f64| IterationRow {
            iteration: 1,
            x,
            y: Some(y),
            feasible: true,
            best: Some(y),
            tau: None,
            bounds_lower: None,
            bounds_upper: None,
            fallback: false,
        };
        let record = RunRecord {
            dim: 2,
            rows: vec![row(vec![0.0, 0.0], 0.0), row(vec![1.0, 1.0], 2.0)],
            best_x: Some(vec![0.0, 0.0]),
            best_y: Some(0.0),
        };
        let m = metrics(&record, &p, &[0.0, 0.0]).unwrap();
        assert_eq!(m.optimality_gap, 0.0);
        assert_eq!(m.distance_to_center, 0.0);

        let record2 = RunRecord {
            best_x: Some(vec![3.0, 4.0]),
            ..record.clone()
        };
        let m2 = metrics(&record2, &p, &[0.0, 0.0]).unwrap();
        assert!((m2.distance_to_center - 5.0).abs() < 1e-12);
    }

    #[test]
    fn initial_windows_exclude_all_minimizers() {
        for name in REGISTRY {
            let p = TestProblem::by_name(name, None).unwrap();
            let w = initial_window(&p);
            for m in p.minimizers() {
                assert!(
                    !w.contains(m),
                    "{name}: window {:?}..{:?} contains minimizer {m:?}",
                    w.lower,
                    w.upper
                );
            }
        }
    }

    #[test]
    fn window_flips_away_from_contained_optimum() {
        let bounds = Bounds::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        // a point inside the default [0.1, 0.3]^2 window
        let w = window_excluding(&bounds, &[vec![0.2, 0.15]]);
        assert!(!w.contains(&[0.2, 0.15]));
        // flipped dimension uses the mirrored [0.7, 0.9] window
        assert!((w.lower[0] - 0.7).abs() < 1e-12 || (w.lower[1] - 0.7).abs() < 1e-12);
    }
}
