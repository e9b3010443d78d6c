//! Exercises the external black-box subprocess protocol end to end against
//! the quadratic stub.

use aebo_cli::history::read_history;
use aebo_cli::{resolve, run_experiment, ExperimentSpec};

fn stub_cmd(extra: &str) -> String {
    let exe = env!("CARGO_BIN_EXE_quadratic_stub");
    if extra.is_empty() {
        exe.to_string()
    } else {
        format!("{exe} {extra}")
    }
}

fn external_spec(cmd: String, out: std::path::PathBuf) -> ExperimentSpec {
    ExperimentSpec {
        external_cmd: Some(cmd),
        initial_lower: Some(vec![-1.0, -1.0]),
        initial_upper: Some(vec![1.0, 1.0]),
        seeds: Some(vec![3]),
        budget: Some(30),
        n_init: Some(8),
        out: Some(out),
        ..Default::default()
    }
}

#[test]
fn quadratic_stub_run_completes_near_origin() {
    let dir = tempfile::tempdir().unwrap();
    let exp = resolve(&external_spec(stub_cmd(""), dir.path().into())).unwrap();
    let outcome = run_experiment(&exp).unwrap();
    assert_eq!(outcome.summary.completed, 1);
    let done = outcome.seed_outcomes[0].result.as_ref().unwrap();
    // maximizing -sum(x^2): the best value approaches 0 at the origin
    assert!(
        done.best_y > -0.05,
        "expected best near 0, got {}",
        done.best_y
    );
    let record = &done.record;
    let best_x = record.best_x.as_ref().unwrap();
    assert!(best_x.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.25);
    assert_eq!(record.rows.len(), 30);
}

#[test]
fn null_objective_becomes_infeasible_in_constrained_mode() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = external_spec(stub_cmd("--null-beyond 0.8"), dir.path().into());
    spec.mode = Some("aebo_constrained".into());
    let exp = resolve(&spec).unwrap();
    let outcome = run_experiment(&exp).unwrap();
    assert_eq!(outcome.summary.completed, 1, "constrained run must survive null outputs");
    let rows = read_history(&outcome.seed_outcomes[0].history_path).unwrap();
    assert_eq!(rows.len(), 30);
    let nulls: Vec<_> = rows.iter().filter(|r| !r.feasible).collect();
    assert!(
        !nulls.is_empty(),
        "expected some points beyond radius 0.8 in the unit box"
    );
    for row in nulls {
        assert!(row.y.is_none(), "infeasible stub responses carry no objective");
    }
    // the returned best is a feasible evaluation
    let best_x = outcome.seed_outcomes[0]
        .result
        .as_ref()
        .unwrap()
        .record
        .best_x
        .clone()
        .unwrap();
    assert!(best_x.iter().map(|v| v * v).sum::<f64>().sqrt() <= 0.8);
}

#[test]
fn non_json_line_fails_the_run_at_that_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let exp = resolve(&external_spec(stub_cmd("--garbage-after 3"), dir.path().into())).unwrap();
    let outcome = run_experiment(&exp).unwrap();
    assert_eq!(outcome.summary.completed, 0);
    let failure = outcome.seed_outcomes[0].result.as_ref().unwrap_err();
    assert!(
        failure.contains("aborted at iteration 4") && failure.contains("protocol violation"),
        "unexpected failure message: {failure}"
    );
    // the partial history holds exactly the three good evaluations
    let rows = read_history(&outcome.seed_outcomes[0].history_path).unwrap();
    assert_eq!(rows.len(), 3);
}

#[test]
fn child_exit_fails_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let exp = resolve(&external_spec(stub_cmd("--exit-after 2"), dir.path().into())).unwrap();
    let outcome = run_experiment(&exp).unwrap();
    assert_eq!(outcome.summary.completed, 0);
    let failure = outcome.seed_outcomes[0].result.as_ref().unwrap_err();
    assert!(
        failure.contains("aborted at iteration 3"),
        "unexpected failure message: {failure}"
    );
}
