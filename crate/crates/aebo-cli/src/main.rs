use aebo_cli::{resolve, run_experiment, ExperimentSpec};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Benchmark and experiment runner for adaptive-expansion Bayesian
/// optimization.
#[derive(Debug, Parser)]
#[command(name = "aebo-cli", version, about)]
struct Cli {
    /// TOML experiment config; every flag below overrides its field.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Registry problem name (see --list-problems).
    #[arg(long)]
    problem: Option<String>,
    /// External black-box command speaking the line-delimited JSON protocol.
    #[arg(long)]
    external_cmd: Option<String>,
    /// aebo | aebo_constrained | fixed_bounds_ei.
    #[arg(long)]
    mode: Option<String>,
    /// minimize | maximize.
    #[arg(long)]
    sense: Option<String>,
    /// Comma-separated run seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Total evaluation budget (default 50 d).
    #[arg(long)]
    budget: Option<usize>,
    /// Initial LHS design size (default 5 d).
    #[arg(long)]
    n_init: Option<usize>,
    /// Dimension for problems defined for any d.
    #[arg(long)]
    dim: Option<usize>,
    /// Std of Gaussian observation noise added to registry problems.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Output directory for history and summary CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Initial box lower corner, comma-separated (required for external runs).
    #[arg(long, value_delimiter = ',')]
    initial_lower: Option<Vec<f64>>,
    /// Initial box upper corner, comma-separated.
    #[arg(long, value_delimiter = ',')]
    initial_upper: Option<Vec<f64>>,
    /// Minimum improvement offset epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Initial room-for-improvement threshold xi_0.
    #[arg(long)]
    xi0: Option<f64>,
    /// Improvement-probability slack kappa.
    #[arg(long)]
    kappa: Option<f64>,
    /// Incumbent-neighborhood gap delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Timeout for one external evaluation, in seconds (default 3600).
    #[arg(long)]
    eval_timeout_secs: Option<u64>,
    /// Print the problem registry and exit.
    #[arg(long)]
    list_problems: bool,
}

impl Cli {
    fn as_spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            problem: self.problem.clone(),
            external_cmd: self.external_cmd.clone(),
            mode: self.mode.clone(),
            sense: self.sense.clone(),
            seeds: self.seeds.clone(),
            budget: self.budget,
            n_init: self.n_init,
            dim: self.dim,
            noise_std: self.noise_std,
            out: self.out.clone(),
            initial_lower: self.initial_lower.clone(),
            initial_upper: self.initial_upper.clone(),
            epsilon: self.epsilon,
            xi0: self.xi0,
            kappa: self.kappa,
            delta: self.delta,
            eval_timeout_secs: self.eval_timeout_secs,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_problems {
        for name in aebo::benchmarks::REGISTRY {
            println!("{name}");
        }
        return ExitCode::SUCCESS;
    }

    let file_spec = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => match ExperimentSpec::from_toml(&text) {
                Ok(spec) => spec,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::FAILURE;
                }
            },
            Err(e) => {
                eprintln!("error: cannot read {}: {e}", path.display());
                return ExitCode::FAILURE;
            }
        },
        None => ExperimentSpec::default(),
    };

    let spec = file_spec.overridden_by(cli.as_spec());
    let experiment = match resolve(&spec) {
        Ok(exp) => exp,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    println!(
        "running {} ({}) for {} seed(s), budget {}, n_init {}",
        experiment.target.label(),
        experiment.mode.as_str(),
        experiment.seeds.len(),
        experiment.budget,
        experiment.n_init
    );

    let outcome = match run_experiment(&experiment) {
        Ok(outcome) => outcome,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };

    for seed in &outcome.seed_outcomes {
        match &seed.result {
            Ok(done) => println!(
                "seed {:>4}: best {:.6}{} ({:.1}s) -> {}",
                seed.seed,
                done.best_y,
                done.optimality_gap
                    .map(|g| format!(", gap {g:.6}"))
                    .unwrap_or_default(),
                done.wall_secs,
                seed.history_path.display()
            ),
            Err(reason) => println!("seed {:>4}: FAILED ({reason})", seed.seed),
        }
    }
    let s = &outcome.summary;
    println!(
        "summary: {}/{} completed, best {} +- {}{} -> {}",
        s.completed,
        s.seeds,
        s.mean_best
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".into()),
        s.std_best
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".into()),
        s.mean_gap
            .map(|g| format!(", mean gap {g:.6}"))
            .unwrap_or_default(),
        outcome.summary_path.display()
    );

    if outcome.summary.completed == outcome.summary.seeds {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
