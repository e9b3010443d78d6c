//! Line-delimited JSON subprocess protocol for external black boxes.
//!
//! One child process is spawned per run and reused across evaluations, so
//! stateful children (e.g. one that keeps a model in memory) amortize their
//! startup. Per evaluation the driver writes one line `{"x":[...]}` to the
//! child's stdin and reads one line `{"y":<number>|null,"feasible":<bool>}`
//! back; a null `y` with `feasible = false` is an infeasible observation.
//! Malformed lines, timeouts, and child exit surface as evaluation errors.

use aebo::optimizer::{BlackBox, EvalError, Evaluation};
use serde::Deserialize;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc;
use std::time::Duration;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    y: Option<f64>,
    feasible: bool,
}

pub struct ExternalBlackBox {
    child: Child,
    stdin: ChildStdin,
    lines: mpsc::Receiver<std::io::Result<String>>,
    dim: usize,
    timeout: Duration,
}

impl ExternalBlackBox {
    /// Spawns `command` (split on whitespace: program followed by arguments)
    /// with piped stdin/stdout.
    pub fn spawn(command: &str, dim: usize, timeout: Duration) -> Result<Self, EvalError> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| EvalError("empty external command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| EvalError(format!("failed to spawn '{command}': {e}")))?;
        let stdin = child
            .stdin
            .take()
            .ok_or_else(|| EvalError("child stdin unavailable".into()))?;
        let stdout = child
            .stdout
            .take()
            .ok_or_else(|| EvalError("child stdout unavailable".into()))?;
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            dim,
            timeout,
        })
    }
}

impl BlackBox for ExternalBlackBox {
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation, EvalError> {
        let request = serde_json::json!({ "x": x }).to_string();
        writeln!(self.stdin, "{request}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| EvalError(format!("failed to write to child: {e}")))?;
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => return Err(EvalError(format!("failed to read from child: {e}"))),
            Err(mpsc::RecvTimeoutError::Timeout) => {
                return Err(EvalError(format!(
                    "external evaluation timed out after {:?}",
                    self.timeout
                )))
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(EvalError("child exited before responding".into()))
            }
        };
        let resp: Response = serde_json::from_str(&line)
            .map_err(|e| EvalError(format!("protocol violation: '{line}': {e}")))?;
        Ok(Evaluation {
            y: resp.y,
            feasible: resp.feasible,
        })
    }
}

impl Drop for ExternalBlackBox {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
