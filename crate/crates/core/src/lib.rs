//! Shuffled extragradient methods for finite-sum variational inequalities.
//!
//! The problem is: find `z*` such that `<F(z*), z - z*> + g(z) - g(z*) >= 0` for
//! all `z`, where `F = (1/n) sum_i F_i` is a finite sum of monotone operators and
//! `g` is a proximal-friendly convex regulariser.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure computation:
//! problem construction, proximal maps, index schedules, the solver loops, and the
//! analysis helpers that turn traces into rate fits and bound checks. File formats,
//! the experiment runner and the command line live in the `visolve` crate.
//!
//! Module map:
//!
//! * [`problem`]: the [`FiniteSumVI`] abstraction, evaluation and residuals.
//! * [`prox`]: the proximal operators and projections used by the problems.
//! * [`schedule`]: independent, random-reshuffling, shuffle-once and cyclic index streams.
//! * [`solver`]: extragradient (per-component and deterministic) and its variance-reduced variant.
//! * [`problems`]: builders for affine, image-denoising and adversarial problems.
//! * [`analysis`]: rate fitting, theorem-envelope checks and reference solutions.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod image;
pub mod linalg;
pub mod point;
pub mod problem;
pub mod problems;
pub mod prox;
pub mod rng;
pub mod schedule;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use point::{sq_distance, Point};
pub use problem::{ComponentFamily, Constant, ConstantSource, Constants, FiniteSumVI, Reference};
pub use prox::ProxKind;
pub use schedule::{Schedule, ScheduleKind};
pub use solver::{Cadence, SolverConfig, StopRule};
pub use trace::{Record, RunTrace, SolverKind, TraceMeta};
