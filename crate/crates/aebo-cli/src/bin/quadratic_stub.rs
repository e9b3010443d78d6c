//! Test double for the external black-box protocol: answers each
//! `{"x":[...]}` line with `{"y":-sum(x^2),"feasible":true}`.
//!
//! Options:
//!   --null-beyond <r>    respond `{"y":null,"feasible":false}` when |x| > r
//!   --garbage-after <n>  emit a non-JSON line after n good responses
//!   --exit-after <n>     exit after n responses

use std::io::{BufRead, Write};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let flag = |name: &str| -> Option<f64> {
        args.iter()
            .position(|a| a == name)
            .and_then(|i| args.get(i + 1))
            .and_then(|v| v.parse().ok())
    };
    let null_beyond = flag("--null-beyond");
    let garbage_after = flag("--garbage-after").map(|v| v as usize);
    let exit_after = flag("--exit-after").map(|v| v as usize);

    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut served = 0usize;

    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(n) = exit_after {
            if served >= n {
                break;
            }
        }
        if let Some(n) = garbage_after {
            if served >= n {
                writeln!(out, "this is not json").unwrap();
                out.flush().unwrap();
                served += 1;
                continue;
            }
        }
        let parsed: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(_) => {
                writeln!(out, "{{\"error\":\"bad request\"}}").unwrap();
                out.flush().unwrap();
                continue;
            }
        };
        let x: Vec<f64> = parsed["x"]
            .as_array()
            .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
            .unwrap_or_default();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let response = match null_beyond {
            Some(r) if norm > r => serde_json::json!({"y": null, "feasible": false}),
            _ => {
                let y = -x.iter().map(|v| v * v).sum::<f64>();
                serde_json::json!({"y": y, "feasible": true})
            }
        };
        writeln!(out, "{response}").unwrap();
        out.flush().unwrap();
        served += 1;
    }
}
