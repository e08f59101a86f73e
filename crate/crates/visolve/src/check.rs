//! Verifies a trace directory against the convergence bounds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use visolve_core::analysis::{check_bounds, fit_rate, BoundInputs, BoundReport, RateFit, Theorem};
use visolve_core::{RunTrace, SolverKind};

use crate::error::{Error, Result};
use crate::experiment::{load_manifest, load_traces, verify_manifest, Manifest};

pub const SLACK_EG: f64 = 2.0;
pub const SLACK_VR: f64 = 1.05;

#[derive(Debug, Clone, PartialEq)]
pub enum GroupVerdict {
    Bound(BoundReport),
    /// Deterministic runs: every seed must show a contraction `ρ̂ < 1`.
    Contraction(Vec<RateFit>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub schedule: String,
    pub verdict: GroupVerdict,
}

impl GroupCheck {
    pub fn pass(&self) -> bool {
        match &self.verdict {
            GroupVerdict::Bound(r) => r.pass,
            GroupVerdict::Contraction(fits) => fits.iter().all(|f| f.rho < 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub groups: Vec<GroupCheck>,
    pub failed_cells: usize,
}

impl CheckOutcome {
    pub fn pass(&self) -> bool {
        self.groups.iter().all(GroupCheck::pass)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            let verdict = if g.pass() { "PASS" } else { "FAIL" };
            match &g.verdict {
                GroupVerdict::Bound(r) => {
                    let _ = writeln!(
                        out,
                        "{verdict} {}: {} bound over {} seeds, {} points, worst mean/bound {:.4} (slack {})",
                        g.schedule,
                        match r.theorem {
                            Theorem::ShuffledEg => "shuffled extragradient",
                            Theorem::VarianceReduced => "variance-reduced",
                        },
                        r.seeds,
                        r.rows.len(),
                        r.worst_ratio,
                        r.slack
                    );
                }
                GroupVerdict::Contraction(fits) => {
                    let worst = fits.iter().map(|f| f.rho).fold(f64::NEG_INFINITY, f64::max);
                    let _ = writeln!(
                        out,
                        "{verdict} {}: largest fitted contraction {worst:.6} over {} seeds",
                        g.schedule,
                        fits.len()
                    );
                }
            }
        }
        if self.failed_cells > 0 {
            let _ = writeln!(
                out,
                "note: {} cells failed during the run",
                self.failed_cells
            );
        }
        out
    }

    /// `schedule,epoch,step,iteration,mean,bound,ratio` rows of the bound checks.
    pub fn report_csv(&self) -> String {
        let mut out = String::from("schedule,epoch,step,iteration,mean,bound,ratio\n");
        for g in &self.groups {
            if let GroupVerdict::Bound(r) = &g.verdict {
                for row in &r.rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        g.schedule,
                        row.epoch,
                        row.step,
                        row.iteration,
                        row.mean,
                        row.bound,
                        row.mean / row.bound
                    );
                }
            }
        }
        out
    }
}

fn pre_plateau_len(trace: &RunTrace) -> usize {
    trace
        .records
        .iter()
        .position(|r| !r.sq_dist.is_some_and(|v| v > 0.0))
        .unwrap_or(trace.records.len())
}

/// Checks every schedule group of `manifest`. `slack` defaults to
/// [`SLACK_EG`] or [`SLACK_VR`] depending on the solver.
pub fn check_manifest(dir: &Path, manifest: &Manifest, slack: Option<f64>) -> Result<CheckOutcome> {
    verify_manifest(dir, manifest)?;
    let traces = load_traces(dir, manifest)?;
    let mut groups: BTreeMap<String, Vec<RunTrace>> = BTreeMap::new();
    for (cell, trace) in traces {
        groups.entry(cell.schedule).or_default().push(trace);
    }
    if groups.is_empty() {
        return Err(Error::Manifest("no successful cells to check".into()));
    }
    let solver: SolverKind = manifest.solver.kind.parse()?;
    let p = &manifest.problem;
    let mut out = Vec::new();
    for (schedule, traces) in groups {
        let verdict = if solver == SolverKind::DetEg {
            let mut fits = Vec::new();
            for t in &traces {
                let end = pre_plateau_len(t);
                fits.push(fit_rate(t, 0..end)?);
            }
            GroupVerdict::Contraction(fits)
        } else {
            let inputs = BoundInputs {
                mu: p.strong_monotonicity.ok_or_else(|| {
                    Error::Manifest("problem has no positive strong monotonicity".into())
                })?,
                n: p.components,
                sigma_sq: p.sigma_star_sq,
            };
            let slack = slack.unwrap_or(if solver == SolverKind::Eg {
                SLACK_EG
            } else {
                SLACK_VR
            });
            GroupVerdict::Bound(check_bounds(&traces, &inputs, slack)?)
        };
        out.push(GroupCheck { schedule, verdict });
    }
    Ok(CheckOutcome {
        groups: out,
        failed_cells: manifest.cells.iter().filter(|c| !c.is_ok()).count(),
    })
}

pub fn check_dir(dir: &Path, slack: Option<f64>) -> Result<CheckOutcome> {
    check_manifest(dir, &load_manifest(dir)?, slack)
}
