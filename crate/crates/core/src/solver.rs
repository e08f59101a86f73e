//! Extragradient solvers.
//!
//! * [`run_eg`]: one extragradient step per component index drawn from a
//!   [`Schedule`]; `n` steps make an epoch and the last iterate of an epoch starts
//!   the next one. Two component calls per step.
//! * [`run_vr_eg`]: the variance-reduced variant. Each step mixes the iterate
//!   with a snapshot `ω`, extrapolates with the cached full operator `F(ω)` and
//!   corrects with `F_i(z^{1/2}) − F_i(ω) + F(ω)`. After the step, with
//!   probability `p`, the snapshot jumps to the pre-step iterate and `F(ω)` is
//!   recomputed (`n` calls), so a step costs `pn + 2` calls on average.
//! * [`run_deterministic_eg`]: the full-operator baseline, `2n` calls per step.
//!
//! Metrics are recorded per [`Cadence`]; computing them never counts as oracle
//! calls.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::point::Point;
use crate::problem::FiniteSumVI;
use crate::rng::{stream, SeededRng};
use crate::schedule::Schedule;
use crate::trace::{Record, RunTrace, SolverKind, StopReason, TraceMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cadence {
    EveryIteration,
    EveryEpoch,
}

/// Early exits. The epoch budget always applies; the residual tolerance is
/// checked at epoch boundaries only.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StopRule {
    pub max_oracle_calls: Option<u64>,
    pub residual_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub epochs: usize,
    /// Mixing weight of the iterate against the snapshot (VR only).
    pub alpha: f64,
    /// Snapshot refresh probability (VR only).
    pub snapshot_prob: f64,
    pub cadence: Cadence,
    pub seed: u64,
    pub stop: StopRule,
    /// Starting point; the origin when absent.
    pub initial_point: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn new(gamma: f64, epochs: usize) -> Self {
        Self {
            gamma,
            epochs,
            alpha: 0.5,
            snapshot_prob: 1.0,
            cadence: Cadence::EveryEpoch,
            seed: 50,
            stop: StopRule::default(),
            initial_point: None,
        }
    }

    /// `p = 1/n` and `α = 1 − p` (α stays at 1/2 when `n = 1`).
    pub fn with_vr_defaults(mut self, n: usize) -> Self {
        self.snapshot_prob = 1.0 / n.max(1) as f64;
        self.alpha = if n > 1 { 1.0 - self.snapshot_prob } else { 0.5 };
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_cadence(mut self, cadence: Cadence) -> Self {
        self.cadence = cadence;
        self
    }

    pub fn with_initial_point(mut self, z0: Vec<f64>) -> Self {
        self.initial_point = Some(z0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(invalid("gamma", "step must be positive and finite"));
        }
        if !(self.snapshot_prob > 0.0 && self.snapshot_prob <= 1.0) {
            return Err(invalid("p", "snapshot probability must lie in (0, 1]"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha", "mixing weight must lie in (0, 1)"));
        }
        if let Some(tol) = self.stop.residual_tol {
            if !(tol > 0.0) {
                return Err(invalid("residual_tol", "must be positive"));
            }
        }
        Ok(())
    }

    fn start(&self, problem: &FiniteSumVI) -> Result<Vec<f64>> {
        self.validate()?;
        match &self.initial_point {
            Some(z0) => {
                check_dim(problem.dim(), z0.len())?;
                Ok(z0.clone())
            }
            None => Ok(vec![0.0; problem.dim()]),
        }
    }
}

/// Iterate, snapshot and the cached `F(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VrState {
    pub z: Vec<f64>,
    snapshot: Vec<f64>,
    snapshot_value: Vec<f64>,
    valid: bool,
}

impl VrState {
    /// `ω = z₀`, with `F(ω)` evaluated (`n` calls).
    pub fn new(problem: &FiniteSumVI, z0: Vec<f64>) -> Result<Self> {
        let snapshot = z0.clone();
        Self::with_snapshot(problem, z0, snapshot)
    }

    pub fn with_snapshot(problem: &FiniteSumVI, z: Vec<f64>, snapshot: Vec<f64>) -> Result<Self> {
        check_dim(problem.dim(), z.len())?;
        check_dim(problem.dim(), snapshot.len())?;
        let mut snapshot_value = vec![0.0; problem.dim()];
        let mut scratch = vec![0.0; problem.dim()];
        problem.full_into(&snapshot, &mut snapshot_value, &mut scratch);
        Ok(Self {
            z,
            snapshot,
            snapshot_value,
            valid: true,
        })
    }

    pub fn snapshot(&self) -> &[f64] {
        &self.snapshot
    }

    pub fn snapshot_value(&self) -> &[f64] {
        &self.snapshot_value
    }

    pub fn is_valid(&self) -> bool {
        self.valid
    }

    /// Moves the snapshot without refreshing the cache; the next step will fail
    /// until [`VrState::refresh`] is called.
    pub fn set_snapshot(&mut self, snapshot: Vec<f64>) {
        self.snapshot = snapshot;
        self.valid = false;
    }

    /// Recomputes `F(ω)`; `n` calls.
    pub fn refresh(&mut self, problem: &FiniteSumVI) {
        let mut scratch = vec![0.0; self.z.len()];
        problem.full_into(&self.snapshot, &mut self.snapshot_value, &mut scratch);
        self.valid = true;
    }
}

struct Workspace {
    half: Vec<f64>,
    trial: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    scratch: Vec<f64>,
}

impl Workspace {
    fn new(d: usize) -> Self {
        Self {
            half: vec![0.0; d],
            trial: vec![0.0; d],
            f: vec![0.0; d],
            g: vec![0.0; d],
            scratch: vec![0.0; d],
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 {
        Ok(())
    } else {
        Err(invalid("gamma", "step must be positive"))
    }
}

/// One extragradient step on component `i`:
/// `z^{1/2} = prox(z − γF_i(z))`, `z⁺ = prox(z − γF_i(z^{1/2}))`.
pub fn eg_step(problem: &FiniteSumVI, z: &[f64], i: usize, gamma: f64) -> Result<Point> {
    check_gamma(gamma)?;
    check_dim(problem.dim(), z.len())?;
    if i >= problem.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: problem.len(),
        });
    }
    let mut ws = Workspace::new(problem.dim());
    let mut out = z.to_vec();
    eg_step_in_place(problem, &mut out, i, gamma, &mut ws);
    Ok(problem.point(out))
}

fn eg_step_in_place(
    problem: &FiniteSumVI,
    z: &mut [f64],
    i: usize,
    gamma: f64,
    ws: &mut Workspace,
) {
    let fam = problem.family();
    let reg = problem.regularizer();
    fam.eval_into(i, z, &mut ws.f);
    linalg::forward_step(z, gamma, &ws.f, &mut ws.half);
    reg.apply_unchecked(gamma, &mut ws.half);
    fam.eval_into(i, &ws.half, &mut ws.f);
    linalg::forward_step(z, gamma, &ws.f, &mut ws.trial);
    reg.apply_unchecked(gamma, &mut ws.trial);
    z.copy_from_slice(&ws.trial);
}

/// Same step with the full operator `F`; `2n` calls.
pub fn full_eg_step(problem: &FiniteSumVI, z: &[f64], gamma: f64) -> Result<Point> {
    check_gamma(gamma)?;
    check_dim(problem.dim(), z.len())?;
    let mut ws = Workspace::new(problem.dim());
    let mut out = z.to_vec();
    full_eg_step_in_place(problem, &mut out, gamma, &mut ws);
    Ok(problem.point(out))
}

/// `steps` full-operator steps in place with one workspace.
pub(crate) fn full_eg_steps(problem: &FiniteSumVI, z: &mut [f64], gamma: f64, steps: usize) {
    let mut ws = Workspace::new(problem.dim());
    for _ in 0..steps {
        full_eg_step_in_place(problem, z, gamma, &mut ws);
    }
}

fn full_eg_step_in_place(problem: &FiniteSumVI, z: &mut [f64], gamma: f64, ws: &mut Workspace) {
    let reg = problem.regularizer();
    problem.full_into(z, &mut ws.f, &mut ws.scratch);
    linalg::forward_step(z, gamma, &ws.f, &mut ws.half);
    reg.apply_unchecked(gamma, &mut ws.half);
    problem.full_into(&ws.half, &mut ws.f, &mut ws.scratch);
    linalg::forward_step(z, gamma, &ws.f, &mut ws.trial);
    reg.apply_unchecked(gamma, &mut ws.trial);
    z.copy_from_slice(&ws.trial);
}

/// Variance-reduced estimator `F_i(x) − F_i(ω) + F(ω)`.
pub fn vr_estimator(
    problem: &FiniteSumVI,
    i: usize,
    x: &[f64],
    snapshot: &[f64],
    snapshot_value: &[f64],
) -> Result<Point> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.dim(), snapshot.len())?;
    check_dim(problem.dim(), snapshot_value.len())?;
    if i >= problem.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: problem.len(),
        });
    }
    let d = problem.dim();
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    problem.family().eval_into(i, x, &mut a);
    problem.family().eval_into(i, snapshot, &mut b);
    for ((ai, bi), ci) in a.iter_mut().zip(&b).zip(snapshot_value) {
        *ai = *ai - bi + ci;
    }
    Ok(problem.point(a))
}

/// One variance-reduced step on component `i`. Returns the oracle calls spent:
/// 2, plus `n` when the snapshot is refreshed.
pub fn vr_eg_step(
    problem: &FiniteSumVI,
    state: &mut VrState,
    i: usize,
    gamma: f64,
    alpha: f64,
    p: f64,
    rng: &mut SeededRng,
) -> Result<u64> {
    check_gamma(gamma)?;
    if !state.valid {
        return Err(Error::InvalidCache);
    }
    check_dim(problem.dim(), state.z.len())?;
    if i >= problem.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: problem.len(),
        });
    }
    let mut ws = Workspace::new(problem.dim());
    Ok(vr_step_in_place(
        problem, state, i, gamma, alpha, p, rng, &mut ws,
    ))
}

#[allow(clippy::too_many_arguments)]
fn vr_step_in_place(
    problem: &FiniteSumVI,
    state: &mut VrState,
    i: usize,
    gamma: f64,
    alpha: f64,
    p: f64,
    rng: &mut SeededRng,
    ws: &mut Workspace,
) -> u64 {
    let fam = problem.family();
    let reg = problem.regularizer();
    // ws.g holds z̄ = αz + (1 − α)ω
    for ((g, z), w) in ws.g.iter_mut().zip(&state.z).zip(&state.snapshot) {
        *g = alpha * z + (1.0 - alpha) * w;
    }
    linalg::forward_step(&ws.g, gamma, &state.snapshot_value, &mut ws.half);
    reg.apply_unchecked(gamma, &mut ws.half);
    fam.eval_into(i, &ws.half, &mut ws.f);
    fam.eval_into(i, &state.snapshot, &mut ws.scratch);
    for ((f, s), c) in ws.f.iter_mut().zip(&ws.scratch).zip(&state.snapshot_value) {
        *f = *f - s + c;
    }
    linalg::forward_step(&ws.g, gamma, &ws.f, &mut ws.trial);
    reg.apply_unchecked(gamma, &mut ws.trial);
    let mut calls = 2;
    if rng.unit() < p {
        // ω ← z_s^t, the iterate before this step
        state.snapshot.copy_from_slice(&state.z);
        problem.full_into(&state.snapshot, &mut state.snapshot_value, &mut ws.scratch);
        calls += problem.len() as u64;
    }
    state.z.copy_from_slice(&ws.trial);
    calls
}

struct Recorder<'a> {
    problem: &'a FiniteSumVI,
    gamma: f64,
    f: Vec<f64>,
    scratch: Vec<f64>,
    records: Vec<Record>,
}

impl<'a> Recorder<'a> {
    fn new(problem: &'a FiniteSumVI, gamma: f64) -> Self {
        let d = problem.dim();
        Self {
            problem,
            gamma,
            f: vec![0.0; d],
            scratch: vec![0.0; d],
            records: Vec::new(),
        }
    }

    fn record(
        &mut self,
        epoch: usize,
        step: usize,
        oracle_calls: u64,
        z: &[f64],
        snapshot: Option<&[f64]>,
    ) -> f64 {
        let residual = self
            .problem
            .residual_with(z, self.gamma, &mut self.f, &mut self.scratch);
        let reference = self.problem.reference().map(|r| r.point.as_slice());
        let sq_dist = reference.map(|r| linalg::sq_dist(z, r));
        let lyapunov = match (reference, snapshot) {
            (Some(r), Some(w)) => sq_dist.map(|d| d + linalg::sq_dist(w, r)),
            _ => None,
        };
        self.records.push(Record {
            epoch,
            step,
            oracle_calls,
            sq_dist,
            lyapunov,
            residual,
        });
        residual
    }

    fn last_is(&self, epoch: usize, step: usize) -> bool {
        self.records
            .last()
            .is_some_and(|r| r.epoch == epoch && r.step == step)
    }
}

fn check_schedule(problem: &FiniteSumVI, schedule: &Schedule) -> Result<()> {
    if schedule.n() != problem.len() {
        return Err(Error::ScheduleMismatch {
            schedule: schedule.n(),
            problem: problem.len(),
        });
    }
    Ok(())
}

fn over_budget(config: &SolverConfig, calls: u64) -> bool {
    config.stop.max_oracle_calls.is_some_and(|m| calls >= m)
}

fn converged(config: &SolverConfig, residual: f64) -> bool {
    config.stop.residual_tol.is_some_and(|tol| residual <= tol)
}

/// Shuffled extragradient (random reshuffling, shuffle-once, cyclic or independent
/// sampling, depending on the schedule).
pub fn run_eg(
    problem: &FiniteSumVI,
    schedule: &mut Schedule,
    config: &SolverConfig,
) -> Result<RunTrace> {
    check_schedule(problem, schedule)?;
    let mut z = config.start(problem)?;
    let n = problem.len();
    let mut ws = Workspace::new(problem.dim());
    let mut rec = Recorder::new(problem, config.gamma);
    let mut calls = 0u64;
    let mut stopped = None;
    rec.record(0, 0, 0, &z, None);
    'epochs: for s in 0..config.epochs {
        schedule.begin_epoch(s)?;
        for t in 0..n {
            let i = schedule.next_index()?;
            eg_step_in_place(problem, &mut z, i, config.gamma, &mut ws);
            calls += 2;
            if t + 1 < n && config.cadence == Cadence::EveryIteration {
                rec.record(s, t + 1, calls, &z, None);
            }
            if over_budget(config, calls) {
                stopped = Some(StopReason::OracleBudget);
                let (e, st) = if t + 1 == n { (s + 1, 0) } else { (s, t + 1) };
                if !rec.last_is(e, st) {
                    rec.record(e, st, calls, &z, None);
                }
                break 'epochs;
            }
        }
        let residual = rec.record(s + 1, 0, calls, &z, None);
        if converged(config, residual) {
            stopped = Some(StopReason::ResidualTolerance);
            break;
        }
    }
    let meta = TraceMeta {
        solver: SolverKind::Eg,
        schedule: Some(schedule.kind()),
        gamma: config.gamma,
        seed: config.seed,
        steps_per_epoch: n,
    };
    Ok(RunTrace {
        meta,
        records: rec.records,
        final_iterate: z,
        final_snapshot: None,
        stopped,
    })
}

/// Variance-reduced shuffled extragradient with `ω₀ = z₀`. The initial `F(ω₀)`
/// is charged `n` calls.
pub fn run_vr_eg(
    problem: &FiniteSumVI,
    schedule: &mut Schedule,
    config: &SolverConfig,
) -> Result<RunTrace> {
    check_schedule(problem, schedule)?;
    let z0 = config.start(problem)?;
    let n = problem.len();
    let mut state = VrState::new(problem, z0)?;
    let mut rng = SeededRng::new(config.seed, stream::SNAPSHOT);
    let mut ws = Workspace::new(problem.dim());
    let mut rec = Recorder::new(problem, config.gamma);
    let mut calls = n as u64;
    let mut stopped = None;
    rec.record(0, 0, calls, &state.z, Some(&state.snapshot));
    'epochs: for s in 0..config.epochs {
        schedule.begin_epoch(s)?;
        for t in 0..n {
            let i = schedule.next_index()?;
            calls += vr_step_in_place(
                problem,
                &mut state,
                i,
                config.gamma,
                config.alpha,
                config.snapshot_prob,
                &mut rng,
                &mut ws,
            );
            if t + 1 < n && config.cadence == Cadence::EveryIteration {
                rec.record(s, t + 1, calls, &state.z, Some(&state.snapshot));
            }
            if over_budget(config, calls) {
                stopped = Some(StopReason::OracleBudget);
                let (e, st) = if t + 1 == n { (s + 1, 0) } else { (s, t + 1) };
                if !rec.last_is(e, st) {
                    rec.record(e, st, calls, &state.z, Some(&state.snapshot));
                }
                break 'epochs;
            }
        }
        let residual = rec.record(s + 1, 0, calls, &state.z, Some(&state.snapshot));
        if converged(config, residual) {
            stopped = Some(StopReason::ResidualTolerance);
            break;
        }
    }
    let meta = TraceMeta {
        solver: SolverKind::VrEg,
        schedule: Some(schedule.kind()),
        gamma: config.gamma,
        seed: config.seed,
        steps_per_epoch: n,
    };
    Ok(RunTrace {
        meta,
        records: rec.records,
        final_iterate: state.z,
        final_snapshot: Some(state.snapshot),
        stopped,
    })
}

/// Full-operator extragradient; `config.epochs` counts iterations and every
/// iteration is recorded.
pub fn run_deterministic_eg(problem: &FiniteSumVI, config: &SolverConfig) -> Result<RunTrace> {
    let mut z = config.start(problem)?;
    let cost = 2 * problem.len() as u64;
    let mut ws = Workspace::new(problem.dim());
    let mut rec = Recorder::new(problem, config.gamma);
    let mut calls = 0u64;
    let mut stopped = None;
    rec.record(0, 0, 0, &z, None);
    for k in 0..config.epochs {
        full_eg_step_in_place(problem, &mut z, config.gamma, &mut ws);
        calls += cost;
        let residual = rec.record(k + 1, 0, calls, &z, None);
        if converged(config, residual) {
            stopped = Some(StopReason::ResidualTolerance);
            break;
        }
        if over_budget(config, calls) {
            stopped = Some(StopReason::OracleBudget);
            break;
        }
    }
    let meta = TraceMeta {
        solver: SolverKind::DetEg,
        schedule: None,
        gamma: config.gamma,
        seed: config.seed,
        steps_per_epoch: 1,
    };
    Ok(RunTrace {
        meta,
        records: rec.records,
        final_iterate: z,
        final_snapshot: None,
        stopped,
    })
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, "must be positive"))
    }
}

/// `min{1/(2μn), 1/(6L)}`.
pub fn default_step_eg(mu: f64, l: f64, n: usize) -> Result<f64> {
    positive("mu", mu)?;
    positive("L", l)?;
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    Ok((1.0 / (2.0 * mu * n as f64)).min(1.0 / (6.0 * l)))
}

/// `min{1/(2μn), 1/(6L), 2·ln(max{2, μ²‖z₀ − z*‖²T / (512n²σ*²)}) / (μT)}`.
pub fn default_step_eg_tuned(
    mu: f64,
    l: f64,
    n: usize,
    iterations: usize,
    dist0_sq: f64,
    sigma_sq: f64,
) -> Result<f64> {
    positive("dist0_sq", dist0_sq)?;
    positive("sigma_star_sq", sigma_sq)?;
    if iterations == 0 {
        return Err(invalid("T", "must be positive"));
    }
    let base = default_step_eg(mu, l, n)?;
    let t = iterations as f64;
    let nf = n as f64;
    let ratio = mu * mu * dist0_sq * t / (512.0 * nf * nf * sigma_sq);
    let tuned = 2.0 * libm::log(ratio.max(2.0)) / (mu * t);
    Ok(base.min(tuned))
}

/// `(1 − α)μ / (6L²)`.
pub fn default_step_vr(mu: f64, l: f64, alpha: f64) -> Result<f64> {
    positive("mu", mu)?;
    positive("L", l)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha", "must lie in (0, 1)"));
    }
    Ok((1.0 - alpha) * mu / (6.0 * l * l))
}
