//! Per-iteration solver records and their CSV form.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "iter,cost,grad_norm,step_or_radius,backtracks,inner_iters,rho,time_s";

/// One row of a trace. Row 0 describes the starting point.
///
/// Gradient descent stores the accepted step in `step_or_radius` and leaves
/// `rho` as NaN; trust-region stores the radius after the update and zero
/// backtracks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step_or_radius: f64,
    pub backtracks: usize,
    pub inner_iters: usize,
    pub rho: f64,
    pub time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub rows: Vec<TraceRow>,
}

impl SolverTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Iterations performed, not counting row 0.
    pub fn iterations(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// First iteration whose cost is at or below `level`.
    pub fn iterations_to(&self, level: f64) -> Option<usize> {
        self.rows.iter().find(|r| r.cost <= level).map(|r| r.iter)
    }

    /// Floats are written in Rust's shortest round-trip form, so parsing the
    /// CSV back gives bit-identical values.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{},{:e},{:e}",
                r.iter, r.cost, r.grad_norm, r.step_or_radius, r.backtracks, r.inner_iters, r.rho, r.time_s
            )
            .expect("writing to a String");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            Some((_, h)) => return Err(Error::Parse { line: 1, msg: format!("unexpected header `{h}`") }),
            None => return Err(Error::Parse { line: 1, msg: "empty trace".into() }),
        }
        let mut rows = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Parse { line: n + 1, msg };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields, got {}", f.len())));
            }
            let int = |s: &str| s.trim().parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
            let real = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
            rows.push(TraceRow {
                iter: int(f[0])?,
                cost: real(f[1])?,
                grad_norm: real(f[2])?,
                step_or_radius: real(f[3])?,
                backtracks: int(f[4])?,
                inner_iters: int(f[5])?,
                rho: real(f[6])?,
                time_s: real(f[7])?,
            });
        }
        Ok(SolverTrace { rows })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Wall clock that can be switched off for reproducible traces.
#[derive(Debug)]
pub(crate) struct Clock {
    start: Option<Instant>,
}

impl Clock {
    pub(crate) fn new(enabled: bool) -> Self {
        Clock { start: enabled.then(Instant::now) }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let t = SolverTrace {
            rows: vec![
                TraceRow { iter: 0, cost: 1.0 / 3.0, grad_norm: 2e-300, step_or_radius: 0.0, backtracks: 0, inner_iters: 0, rho: f64::NAN, time_s: 0.0 },
                TraceRow { iter: 1, cost: 1e-21, grad_norm: 0.1, step_or_radius: 12.5, backtracks: 3, inner_iters: 7, rho: 0.93, time_s: 1.5e-3 },
            ],
        };
        let csv = t.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        let back = SolverTrace::from_csv(&csv).unwrap();
        assert_eq!(back.rows[1], t.rows[1]);
        assert_eq!(back.rows[0].cost.to_bits(), t.rows[0].cost.to_bits());
        assert!(back.rows[0].rho.is_nan());
        assert_eq!(back.iterations(), 1);
        assert_eq!(back.iterations_to(1e-6), Some(1));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(SolverTrace::from_csv("iter,cost\n").is_err());
        let bad = format!("{CSV_HEADER}\n0,1,2,3,4,5,6\n");
        assert!(matches!(SolverTrace::from_csv(&bad), Err(Error::Parse { line: 2, .. })));
    }
}
