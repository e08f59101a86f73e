//! Rate fitting, bound checks against the convergence theorems, and reference
//! solutions.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{invalid, Error, Result};
use crate::problem::FiniteSumVI;
use crate::solver::{full_eg_steps, run_deterministic_eg, SolverConfig};
use crate::trace::{Record, RunTrace, SolverKind};

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    /// Per-iteration contraction factor `exp(slope)`.
    pub rho: f64,
    /// Median of the last tenth of the trace.
    pub plateau: f64,
    pub window: Range<usize>,
    pub r_squared: f64,
}

/// Least-squares line `y = a + b x`; returns `(b, a, R²)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    };
    (slope, intercept, r2)
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        values[m / 2]
    } else {
        0.5 * (values[m / 2 - 1] + values[m / 2])
    }
}

/// Fits `log(sq_dist)` against the flattened iteration over the records in `window`.
pub fn fit_rate(trace: &RunTrace, window: Range<usize>) -> Result<RateFit> {
    let values: Vec<f64> = trace
        .records
        .iter()
        .map(|r| r.sq_dist.ok_or(Error::MissingMetric("sq_dist")))
        .collect::<Result<_>>()?;
    let iterations: Vec<f64> = trace
        .records
        .iter()
        .map(|r| r.iteration(trace.meta.steps_per_epoch) as f64)
        .collect();
    fit_series(&iterations, &values, window)
}

/// [`fit_rate`] on raw `(iteration, value)` series.
pub fn fit_series(iterations: &[f64], values: &[f64], window: Range<usize>) -> Result<RateFit> {
    if iterations.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: iterations.len(),
            got: values.len(),
        });
    }
    if window.end > values.len() || window.start >= window.end {
        return Err(Error::FitWindow(format!(
            "window {window:?} outside trace of {} records",
            values.len()
        )));
    }
    if window.len() < 10 {
        return Err(Error::FitWindow(format!(
            "window holds {} points, need at least 10",
            window.len()
        )));
    }
    let ys = &values[window.clone()];
    if let Some(k) = ys.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::FitWindow(format!(
            "non-positive value at record {}; fit only the segment before the plateau",
            window.start + k
        )));
    }
    let logs: Vec<f64> = ys.iter().map(|v| libm::log(*v)).collect();
    let (slope, _, r_squared) = linear_fit(&iterations[window.clone()], &logs);
    let tail = (values.len() / 10).max(1);
    let mut last: Vec<f64> = values[values.len() - tail..].to_vec();
    Ok(RateFit {
        rho: libm::exp(slope),
        plateau: median(&mut last),
        window,
        r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// `E‖z_S − z*‖² ≤ (1 − γμ/2)^{Sn} ‖z₀ − z*‖² + 256γn²σ*²/μ` at epoch ends.
    ShuffledEg,
    /// `E V_T ≤ (1 − γμ/4)^T V₀` with `V = ‖z − z*‖² + ‖ω − z*‖²`.
    VarianceReduced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub epoch: usize,
    pub step: usize,
    pub iteration: usize,
    pub mean: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub theorem: Theorem,
    pub slack: f64,
    pub seeds: usize,
    pub rows: Vec<BoundRow>,
    /// Largest `mean / bound` over the rows.
    pub worst_ratio: f64,
    pub pass: bool,
}

pub const MIN_SEEDS: usize = 20;

/// Problem quantities entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub mu: f64,
    pub n: usize,
    /// Needed for plain extragradient only.
    pub sigma_sq: Option<f64>,
}

impl BoundInputs {
    pub fn from_problem(problem: &FiniteSumVI) -> Result<Self> {
        if problem.reference().is_none() {
            return Err(Error::MissingReference);
        }
        let c = problem.constants();
        let mu = c
            .mu()
            .filter(|m| *m > 0.0)
            .ok_or(Error::MissingMetric("strong monotonicity"))?;
        Ok(Self {
            mu,
            n: problem.len(),
            sigma_sq: c.sigma_sq(),
        })
    }
}

/// Compares the seed-mean metric with the closed-form bound at every aligned
/// record; passes iff `mean ≤ slack · bound` everywhere. Plain extragradient
/// traces are checked at epoch ends only, variance-reduced traces at every record.
pub fn check_theorem_bounds(
    traces: &[RunTrace],
    problem: &FiniteSumVI,
    slack: f64,
) -> Result<BoundReport> {
    check_bounds(traces, &BoundInputs::from_problem(problem)?, slack)
}

/// [`check_theorem_bounds`] with the problem constants given directly.
pub fn check_bounds(traces: &[RunTrace], inputs: &BoundInputs, slack: f64) -> Result<BoundReport> {
    if traces.len() < MIN_SEEDS {
        return Err(invalid(
            "traces",
            format!("need at least {MIN_SEEDS} seeds, got {}", traces.len()),
        ));
    }
    if !(slack > 0.0) {
        return Err(invalid("slack", "must be positive"));
    }
    let meta = &traces[0].meta;
    let theorem = match meta.solver {
        SolverKind::Eg => Theorem::ShuffledEg,
        SolverKind::VrEg => Theorem::VarianceReduced,
        SolverKind::DetEg => {
            return Err(invalid(
                "solver",
                "no stochastic bound applies to det-eg traces",
            ))
        }
    };
    let BoundInputs { mu, n, sigma_sq } = *inputs;
    if !(mu > 0.0) || n == 0 {
        return Err(invalid("mu", "bounds need μ > 0 and n ≥ 1"));
    }
    let gamma = meta.gamma;
    for t in traces {
        if t.meta.solver != meta.solver
            || t.meta.gamma != gamma
            || t.records.len() != traces[0].records.len()
        {
            return Err(invalid("traces", "traces differ in solver, step or length"));
        }
    }
    let metric = |r: &Record| match theorem {
        Theorem::ShuffledEg => r.sq_dist.ok_or(Error::MissingMetric("sq_dist")),
        Theorem::VarianceReduced => r.lyapunov.ok_or(Error::MissingMetric("lyapunov")),
    };
    let seeds = traces.len() as f64;
    let mut means = Vec::with_capacity(traces[0].records.len());
    for (k, r0) in traces[0].records.iter().enumerate() {
        let mut sum = 0.0;
        for t in traces {
            let r = &t.records[k];
            if (r.epoch, r.step) != (r0.epoch, r0.step) {
                return Err(invalid("traces", "records are not aligned across seeds"));
            }
            sum += metric(r)?;
        }
        means.push(sum / seeds);
    }
    let start = means[0];
    let floor = match theorem {
        Theorem::ShuffledEg => {
            let sigma = sigma_sq.ok_or(Error::MissingMetric("sigma_star_sq"))?;
            256.0 * gamma * (n * n) as f64 * sigma / mu
        }
        Theorem::VarianceReduced => 0.0,
    };
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (r, mean) in traces[0].records.iter().zip(&means) {
        let iteration = r.iteration(n);
        let bound = match theorem {
            Theorem::ShuffledEg => {
                if r.step != 0 {
                    continue;
                }
                libm::pow(1.0 - gamma * mu / 2.0, iteration as f64) * start + floor
            }
            Theorem::VarianceReduced => libm::pow(1.0 - gamma * mu / 4.0, iteration as f64) * start,
        };
        let ratio = if bound > 0.0 {
            mean / bound
        } else if *mean > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(ratio);
        rows.push(BoundRow {
            epoch: r.epoch,
            step: r.step,
            iteration,
            mean: *mean,
            bound,
        });
    }
    let pass = rows.iter().all(|row| row.mean <= slack * row.bound);
    Ok(BoundReport {
        theorem,
        slack,
        seeds: traces.len(),
        rows,
        worst_ratio: worst,
        pass,
    })
}

/// Largest sampled `‖F(a) − F(b)‖ / ‖a − b‖` of the full operator around the origin.
pub fn sampled_full_lipschitz(problem: &FiniteSumVI, pairs: usize, seed: u64) -> Result<f64> {
    Ok(problem
        .sample_full_constants(pairs, seed, None, 1.0)?
        .lipschitz)
}

/// Runs full-operator extragradient with `γ = 1/(6L̂)` (or the given step) from
/// the stored solution if any, else the origin, until the natural residual at
/// that same step drops to `tol`; returns the problem with the result attached.
pub fn compute_reference(
    problem: &FiniteSumVI,
    tol: f64,
    max_iterations: usize,
    gamma: Option<f64>,
) -> Result<FiniteSumVI> {
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let gamma = match gamma {
        Some(g) => g,
        None => {
            let l = sampled_full_lipschitz(problem, 32, 0)?;
            if !(l > 0.0) {
                return Err(invalid("L", "sampled Lipschitz constant is zero"));
            }
            1.0 / (6.0 * l)
        }
    };
    if !(gamma > 0.0) {
        return Err(invalid("gamma", "step must be positive"));
    }
    let mut z = match problem.reference() {
        Some(r) => r.point.clone(),
        None => vec![0.0; problem.dim()],
    };
    let mut residual = problem.natural_residual(&z, gamma)?;
    let mut done = 0;
    while !(residual <= tol) {
        if done >= max_iterations || !residual.is_finite() {
            return Err(Error::IterationCap {
                iterations: done,
                residual,
                tolerance: tol,
            });
        }
        let chunk = 10.min(max_iterations - done);
        full_eg_steps(problem, &mut z, gamma, chunk);
        done += chunk;
        residual = problem.natural_residual(&z, gamma)?;
    }
    problem.clone().with_reference(z, tol, gamma)
}

/// Runs deterministic extragradient on `problem` and returns its trace; a thin
/// convenience over [`run_deterministic_eg`].
pub fn deterministic_trace(
    problem: &FiniteSumVI,
    gamma: f64,
    iterations: usize,
) -> Result<RunTrace> {
    run_deterministic_eg(problem, &SolverConfig::new(gamma, iterations))
}
