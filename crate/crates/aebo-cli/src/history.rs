//! Per-run history CSV: one row per evaluation with the schema
//! `iteration, x_1..x_d, y, feasible, best, tau, box_lo_1..box_lo_d,
//! box_hi_1..box_hi_d, fallback`.
//!
//! Floats are serialized with 17 significant digits so parsing a written
//! history reproduces the in-memory record bit-exactly; absent optionals are
//! empty fields.

use aebo::optimizer::{IterationRow, RunRecord};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed history: {0}")]
    Malformed(String),
}

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn parse_f64(s: &str) -> Result<f64, HistoryError> {
    s.parse()
        .map_err(|_| HistoryError::Malformed(format!("bad float '{s}'")))
}

fn parse_opt(s: &str) -> Result<Option<f64>, HistoryError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f64(s).map(Some)
    }
}

pub fn header(dim: usize) -> Vec<String> {
    let mut cols = vec!["iteration".to_string()];
    cols.extend((1..=dim).map(|i| format!("x_{i}")));
    cols.extend(["y", "feasible", "best", "tau"].map(String::from));
    cols.extend((1..=dim).map(|i| format!("box_lo_{i}")));
    cols.extend((1..=dim).map(|i| format!("box_hi_{i}")));
    cols.push("fallback".to_string());
    cols
}

pub fn write_history(path: &Path, record: &RunRecord) -> Result<(), HistoryError> {
    let mut w = csv::Writer::from_path(path)?;
    let dim = record.dim;
    w.write_record(header(dim))?;
    for row in &record.rows {
        let mut fields = vec![row.iteration.to_string()];
        fields.extend(row.x.iter().map(|&v| fmt_f64(v)));
        fields.push(fmt_opt(row.y));
        fields.push(row.feasible.to_string());
        fields.push(fmt_opt(row.best));
        fields.push(fmt_opt(row.tau));
        for i in 0..dim {
            fields.push(
                row.bounds_lower
                    .as_ref()
                    .map(|b| fmt_f64(b[i]))
                    .unwrap_or_default(),
            );
        }
        for i in 0..dim {
            fields.push(
                row.bounds_upper
                    .as_ref()
                    .map(|b| fmt_f64(b[i]))
                    .unwrap_or_default(),
            );
        }
        fields.push(row.fallback.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<Vec<IterationRow>, HistoryError> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = r.headers()?.clone();
    let dim = headers.iter().filter(|h| h.starts_with("x_")).count();
    if dim == 0 {
        return Err(HistoryError::Malformed("no coordinate columns".into()));
    }
    let mut rows = Vec::new();
    for result in r.records() {
        let rec = result?;
        let expected = 1 + dim + 4 + 2 * dim + 1;
        if rec.len() != expected {
            return Err(HistoryError::Malformed(format!(
                "expected {expected} fields, got {}",
                rec.len()
            )));
        }
        let mut i = 0;
        let mut next = || {
            let v = rec[i].to_string();
            i += 1;
            v
        };
        let iteration = next()
            .parse()
            .map_err(|_| HistoryError::Malformed("bad iteration".into()))?;
        let x: Vec<f64> = (0..dim)
            .map(|_| parse_f64(&next()))
            .collect::<Result<_, _>>()?;
        let y = parse_opt(&next())?;
        let feasible = next() == "true";
        let best = parse_opt(&next())?;
        let tau = parse_opt(&next())?;
        let lo: Vec<Option<f64>> = (0..dim)
            .map(|_| parse_opt(&next()))
            .collect::<Result<_, _>>()?;
        let hi: Vec<Option<f64>> = (0..dim)
            .map(|_| parse_opt(&next()))
            .collect::<Result<_, _>>()?;
        let fallback = next() == "true";
        let bounds_lower = lo.iter().all(Option::is_some).then(|| {
            lo.into_iter().map(Option::unwrap).collect()
        });
        let bounds_upper = hi.iter().all(Option::is_some).then(|| {
            hi.into_iter().map(Option::unwrap).collect()
        });
        rows.push(IterationRow {
            iteration,
            x,
            y,
            feasible,
            best,
            tau,
            bounds_lower,
            bounds_upper,
            fallback,
        });
    }
    Ok(rows)
}
