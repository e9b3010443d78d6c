//! Bayesian optimization over an adaptively expanding search space.
//!
//! The optimizer starts from an initial box that need not contain the
//! optimum. Each iteration it fits a GP surrogate, derives a variance
//! threshold `tau k0` by root finding so that exploration on the
//! low-uncertainty boundary never out-promises exploitation near the
//! incumbent, expands the data bounding box by a spectrum-derived per-axis
//! rate, and maximizes an epsilon-offset expected improvement inside the
//! expanded box subject to the variance constraint. A feasibility-weighted
//! variant handles constrained or partially defined objectives, and a
//! fixed-bounds EI baseline is included for contrast.
//!
//! ```
//! use aebo::benchmarks::{initial_window, ProblemBlackBox, TestProblem};
//! use aebo::optimizer::{run, OptimizerConfig, Sense};
//!
//! let problem = TestProblem::by_name("branin", None).unwrap();
//! let mut cfg = OptimizerConfig::new(initial_window(&problem));
//! cfg.sense = Sense::Minimize;
//! cfg.budget = 40; // demo-sized; protocol default is 50 d
//! cfg.n_init = 10;
//! let record = run(&mut ProblemBlackBox::new(problem), &cfg).unwrap();
//! assert_eq!(record.rows.len(), 40);
//! ```

pub mod acquisition;
pub mod adaptive_control;
pub mod benchmarks;
pub mod expansion;
pub mod gp;
pub mod inner_search;
pub mod optimizer;
pub(crate) mod stdnorm;

pub use acquisition::{AcquisitionContext, FeasibilityModel};
pub use adaptive_control::{AnnealSchedule, ControlParams};
pub use expansion::{EigenMode, ExpansionBounds};
pub use gp::{GpModel, KernelParams, ObservationSet};
pub use inner_search::SearchConfig;
pub use optimizer::{
    run, BlackBox, Bounds, Evaluation, Mode, OptimizerConfig, RunError, RunRecord, Sense,
};
