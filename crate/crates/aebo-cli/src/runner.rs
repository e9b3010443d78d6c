//! Experiment execution: fan seeds out across workers, persist one history
//! CSV per seed, and aggregate a summary after all runs join.

use crate::external::ExternalBlackBox;
use crate::history::{fmt_f64, write_history, HistoryError};
use crate::spec::{ResolvedExperiment, Target};
use aebo::benchmarks::{metrics, NoisyBlackBox, ProblemBlackBox};
use aebo::optimizer::{run, OptimizerConfig, RunError, RunRecord};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

/// Decorrelates the observation-noise stream from the optimizer's seed.
const NOISE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error("invalid run configuration: {0}")]
    Config(String),
}

/// Result of one seeded run.
#[derive(Debug)]
pub struct SeedOutcome {
    pub seed: u64,
    pub history_path: PathBuf,
    pub result: Result<CompletedRun, String>,
}

#[derive(Debug, Clone)]
pub struct CompletedRun {
    pub record: RunRecord,
    pub best_y: f64,
    pub optimality_gap: Option<f64>,
    pub distance_to_center: Option<f64>,
    pub wall_secs: f64,
}

/// Aggregate over the completed runs of one experiment.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub problem: String,
    pub mode: String,
    pub seeds: usize,
    pub completed: usize,
    pub mean_best: Option<f64>,
    pub std_best: Option<f64>,
    pub mean_gap: Option<f64>,
    pub mean_dist_to_center: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub seed_outcomes: Vec<SeedOutcome>,
    pub summary: SummaryRow,
    pub summary_path: PathBuf,
}

fn build_config(exp: &ResolvedExperiment, seed: u64) -> OptimizerConfig {
    let mut cfg = OptimizerConfig::new(exp.initial_bounds.clone());
    cfg.budget = exp.budget;
    cfg.n_init = exp.n_init;
    cfg.mode = exp.mode;
    cfg.sense = exp.sense;
    cfg.seed = seed;
    cfg.estimate_noise = exp.noise_std > 0.0;
    if let Some(e) = exp.epsilon {
        cfg.epsilon = e;
    }
    if let Some(v) = exp.xi0 {
        cfg.control.xi0 = v;
    }
    if let Some(v) = exp.kappa {
        cfg.control.kappa = v;
    }
    if let Some(v) = exp.delta {
        cfg.control.delta = v;
    }
    cfg
}

fn execute_seed(exp: &ResolvedExperiment, seed: u64) -> (Result<CompletedRun, String>, RunRecord) {
    let cfg = build_config(exp, seed);
    let started = Instant::now();
    let outcome = match &exp.target {
        Target::Problem(problem) => {
            let inner = ProblemBlackBox::new(problem.clone());
            if exp.noise_std > 0.0 {
                let mut bb = NoisyBlackBox::new(inner, exp.noise_std, seed ^ NOISE_SEED_SALT);
                run(&mut bb, &cfg)
            } else {
                let mut bb = inner;
                run(&mut bb, &cfg)
            }
        }
        Target::External {
            command,
            dim,
            timeout,
        } => match ExternalBlackBox::spawn(command, *dim, *timeout) {
            Ok(mut bb) => run(&mut bb, &cfg),
            Err(e) => Err(RunError::Aborted {
                iteration: 0,
                reason: e.to_string(),
                partial: Box::new(RunRecord {
                    dim: *dim,
                    rows: Vec::new(),
                    best_x: None,
                    best_y: None,
                }),
            }),
        },
    };
    let wall_secs = started.elapsed().as_secs_f64();

    match outcome {
        Ok(record) => {
            let (gap, dist) = match &exp.target {
                Target::Problem(problem) => match metrics(
                    &record,
                    problem,
                    &exp.initial_bounds.center(),
                ) {
                    Ok(m) => (Some(m.optimality_gap), Some(m.distance_to_center)),
                    Err(_) => (None, None),
                },
                Target::External { .. } => (None, None),
            };
            let completed = CompletedRun {
                best_y: record.best_y.unwrap_or(f64::NAN),
                optimality_gap: gap,
                distance_to_center: dist,
                wall_secs,
                record: record.clone(),
            };
            (Ok(completed), record)
        }
        Err(RunError::Aborted {
            iteration,
            reason,
            partial,
        }) => (
            Err(format!("aborted at iteration {iteration}: {reason}")),
            *partial,
        ),
        Err(other) => (
            Err(other.to_string()),
            RunRecord {
                dim: exp.initial_bounds.dim(),
                rows: Vec::new(),
                best_x: None,
                best_y: None,
            },
        ),
    }
}

/// Runs every seed (in parallel), writes one history file per seed and a
/// single summary row over the completed runs. History files are a pure
/// function of the spec, so reruns are byte-identical.
pub fn run_experiment(exp: &ResolvedExperiment) -> Result<ExperimentOutcome, RunnerError> {
    std::fs::create_dir_all(&exp.out_dir)?;
    let label = exp.target.label();
    let mode = exp.mode.as_str();

    let results: Vec<(u64, PathBuf, Result<CompletedRun, String>, RunRecord)> = exp
        .seeds
        .par_iter()
        .map(|&seed| {
            let path = exp
                .out_dir
                .join(format!("history_{label}_{mode}_seed{seed}.csv"));
            let (result, record) = execute_seed(exp, seed);
            (seed, path, result, record)
        })
        .collect();

    let mut seed_outcomes = Vec::with_capacity(results.len());
    for (seed, path, result, record) in results {
        write_history(&path, &record)?;
        seed_outcomes.push(SeedOutcome {
            seed,
            history_path: path,
            result,
        });
    }

    let summary = summarize(&label, mode, &seed_outcomes);
    let summary_path = exp.out_dir.join("summary.csv");
    write_summary(&summary_path, &summary)?;
    Ok(ExperimentOutcome {
        seed_outcomes,
        summary,
        summary_path,
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn summarize(problem: &str, mode: &str, outcomes: &[SeedOutcome]) -> SummaryRow {
    let completed: Vec<&CompletedRun> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok())
        .collect();
    let bests: Vec<f64> = completed.iter().map(|c| c.best_y).collect();
    let mean_best = mean(&bests);
    let std_best = mean_best.map(|m| {
        (bests.iter().map(|b| (b - m) * (b - m)).sum::<f64>() / bests.len() as f64).sqrt()
    });
    let gaps: Vec<f64> = completed.iter().filter_map(|c| c.optimality_gap).collect();
    let dists: Vec<f64> = completed
        .iter()
        .filter_map(|c| c.distance_to_center)
        .collect();
    SummaryRow {
        problem: problem.to_string(),
        mode: mode.to_string(),
        seeds: outcomes.len(),
        completed: completed.len(),
        mean_best,
        std_best,
        mean_gap: mean(&gaps),
        mean_dist_to_center: mean(&dists),
        wall_time_s: completed.iter().map(|c| c.wall_secs).sum(),
    }
}

fn write_summary(path: &Path, row: &SummaryRow) -> Result<(), HistoryError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "problem",
        "mode",
        "seeds",
        "completed",
        "mean_best",
        "std_best",
        "mean_gap",
        "mean_dist_to_center",
        "wall_time_s",
    ])?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    w.write_record([
        row.problem.clone(),
        row.mode.clone(),
        row.seeds.to_string(),
        row.completed.to_string(),
        opt(row.mean_best),
        opt(row.std_best),
        opt(row.mean_gap),
        opt(row.mean_dist_to_center),
        format!("{:.3}", row.wall_time_s),
    ])?;
    w.flush()?;
    Ok(())
}
