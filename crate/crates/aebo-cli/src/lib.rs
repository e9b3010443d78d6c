//! Experiment runner for the aebo optimizer: benchmark replications with
//! seeded parallel runs, per-run CSV histories, aggregate summaries, and a
//! line-delimited JSON subprocess protocol for external black boxes.

pub mod external;
pub mod history;
pub mod runner;
pub mod spec;

pub use external::ExternalBlackBox;
pub use runner::{run_experiment, ExperimentOutcome, SeedOutcome, SummaryRow};
pub use spec::{resolve, ExperimentSpec, ResolvedExperiment, Target};
