use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};
use core::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::schedule::ScheduleKind;

pub const CSV_HEADER: &str = "epoch,step,oracle_calls,sq_dist,lyapunov,residual";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    /// Per-component extragradient driven by a schedule.
    Eg,
    /// Variance-reduced extragradient with a loopless snapshot.
    VrEg,
    /// Full-operator extragradient.
    DetEg,
}

impl SolverKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Eg => "eg",
            SolverKind::VrEg => "vr-eg",
            SolverKind::DetEg => "det-eg",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eg" => Ok(SolverKind::Eg),
            "vr-eg" => Ok(SolverKind::VrEg),
            "det-eg" => Ok(SolverKind::DetEg),
            other => Err(invalid(
                "solver",
                format!("unknown solver `{}`", other),
            )),
        }
    }
}

/// State `z_s^t` after `step` inner iterations of epoch `epoch`.
///
/// The end of epoch `s` is recorded as `(s + 1, 0)`. For the deterministic
/// solver every iteration is its own epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub epoch: usize,
    pub step: usize,
    pub oracle_calls: u64,
    pub sq_dist: Option<f64>,
    pub lyapunov: Option<f64>,
    pub residual: f64,
}

impl Record {
    /// Flattened iteration count `T = epoch·n + step`.
    pub fn iteration(&self, n: usize) -> usize {
        self.epoch * n + self.step
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub solver: SolverKind,
    pub schedule: Option<ScheduleKind>,
    pub gamma: f64,
    pub seed: u64,
    /// Inner iterations per epoch (`n` for the stochastic solvers, 1 for det-eg).
    pub steps_per_epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    OracleBudget,
    ResidualTolerance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub records: Vec<Record>,
    pub final_iterate: Vec<f64>,
    /// Final snapshot `ω` (variance-reduced runs only).
    pub final_snapshot: Option<Vec<f64>>,
    pub stopped: Option<StopReason>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&Record> {
        self.records.last()
    }

    pub fn oracle_calls(&self) -> u64 {
        self.last().map_or(0, |r| r.oracle_calls)
    }

    /// Serialises the records as CSV with [`CSV_HEADER`]; missing metrics are empty fields.
    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }
}

pub fn records_to_csv(records: &[Record]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = write!(out, "{},{},{},", r.epoch, r.step, r.oracle_calls);
        if let Some(v) = r.sq_dist {
            let _ = write!(out, "{v}");
        }
        out.push(',');
        if let Some(v) = r.lyapunov {
            let _ = write!(out, "{v}");
        }
        let _ = writeln!(out, ",{}", r.residual);
    }
    out
}

/// Parses CSV written by [`records_to_csv`].
pub fn records_from_csv(text: &str) -> Result<Vec<Record>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::TraceFormat {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::TraceFormat {
                line: line_no,
                reason: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::TraceFormat {
            line: line_no,
            reason: format!("bad {what}"),
        };
        let opt = |s: &str, what: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(what))
            }
        };
        out.push(Record {
            epoch: fields[0].parse().map_err(|_| bad("epoch"))?,
            step: fields[1].parse().map_err(|_| bad("step"))?,
            oracle_calls: fields[2].parse().map_err(|_| bad("oracle_calls"))?,
            sq_dist: opt(fields[3], "sq_dist")?,
            lyapunov: opt(fields[4], "lyapunov")?,
            residual: fields[5].parse().map_err(|_| bad("residual"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let recs = vec![
            Record {
                epoch: 0,
                step: 0,
                oracle_calls: 0,
                sq_dist: Some(2.5),
                lyapunov: None,
                residual: 1.0,
            },
            Record {
                epoch: 1,
                step: 0,
                oracle_calls: 8,
                sq_dist: None,
                lyapunov: None,
                residual: 0.25,
            },
        ];
        let csv = records_to_csv(&recs);
        assert_eq!(
            csv,
            "epoch,step,oracle_calls,sq_dist,lyapunov,residual\n0,0,0,2.5,,1\n1,0,8,,,0.25\n"
        );
        assert_eq!(records_from_csv(&csv).unwrap(), recs);
        assert!(matches!(
            records_from_csv("a,b\n"),
            Err(Error::TraceFormat { line: 1, .. })
        ));
        assert!(matches!(
            records_from_csv("epoch,step,oracle_calls,sq_dist,lyapunov,residual\n0,0,x,,,1\n"),
            Err(Error::TraceFormat { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec((0usize..100, 0usize..100, 0u64..10_000, prop::option::of(0.0..1e6f64), prop::option::of(0.0..1e6f64), 0.0..1e3f64), 0..20)) {
            let recs: Vec<Record> = rows.into_iter().map(|(epoch, step, oracle_calls, sq_dist, lyapunov, residual)| Record { epoch, step, oracle_calls, sq_dist, lyapunov, residual }).collect();
            prop_assert_eq!(records_from_csv(&records_to_csv(&recs)).unwrap(), recs);
        }
    }
}
