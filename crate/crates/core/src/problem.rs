//! Finite-sum variational inequalities `F = (1/n) Σ F_i` with a proximal regulariser.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::point::Point;
use crate::prox::ProxKind;
use crate::rng::{stream, SeededRng};

/// The `n` component operators of a problem.
///
/// Implementations must be deterministic and must write every coordinate of
/// `out`. Callers guarantee `i < len()` and that both slices have length `dim()`.
pub trait ComponentFamily: Send + Sync {
    fn dim(&self) -> usize;

    fn len(&self) -> usize;

    fn eval_into(&self, i: usize, z: &[f64], out: &mut [f64]);

    /// `acc += F_i(z)`. Overrides must give bit-identical results to the default,
    /// e.g. by skipping coordinates where `F_i` is exactly zero.
    fn accumulate_into(&self, i: usize, z: &[f64], acc: &mut [f64], scratch: &mut [f64]) {
        self.eval_into(i, z, scratch);
        for (a, s) in acc.iter_mut().zip(scratch.iter()) {
            *a += *s;
        }
    }
}

/// Component family backed by a closure `(i, z, out)`.
pub struct FnFamily<F> {
    dim: usize,
    len: usize,
    f: F,
}

impl<F> FnFamily<F>
where
    F: Fn(usize, &[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(dim: usize, len: usize, f: F) -> Self {
        Self { dim, len, f }
    }
}

impl<F> ComponentFamily for FnFamily<F>
where
    F: Fn(usize, &[f64], &mut [f64]) + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.len
    }
    fn eval_into(&self, i: usize, z: &[f64], out: &mut [f64]) {
        (self.f)(i, z, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantSource {
    /// Computed from the problem data (eigenvalues, closed forms).
    Analytic,
    /// Extremum over sampled point pairs.
    Sampled,
    /// Shifted from another constant by a wrapper (regularisation).
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant {
    pub value: f64,
    pub source: ConstantSource,
}

impl Constant {
    pub fn analytic(value: f64) -> Self {
        Self {
            value,
            source: ConstantSource::Analytic,
        }
    }
    pub fn sampled(value: f64) -> Self {
        Self {
            value,
            source: ConstantSource::Sampled,
        }
    }
}

/// Lipschitz bound `L`, strong-monotonicity modulus `μ` and the variance at the
/// solution `σ*²`, each optional.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Constants {
    pub lipschitz: Option<Constant>,
    pub strong_monotonicity: Option<Constant>,
    pub sigma_star_sq: Option<Constant>,
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        let l = self.lipschitz.map(|c| c.value);
        let mu = self.strong_monotonicity.map(|c| c.value);
        if let Some(mu) = mu {
            if !(mu >= 0.0) {
                return Err(invalid("mu", "strong monotonicity must be non-negative"));
            }
        }
        if let (Some(mu), Some(l)) = (mu, l) {
            if mu > l * (1.0 + 1e-12) {
                return Err(invalid("mu", "must not exceed the Lipschitz constant"));
            }
        }
        if let Some(s) = self.sigma_star_sq {
            if !(s.value >= 0.0) {
                return Err(invalid("sigma_star_sq", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn l(&self) -> Option<f64> {
        self.lipschitz.map(|c| c.value)
    }

    pub fn mu(&self) -> Option<f64> {
        self.strong_monotonicity.map(|c| c.value)
    }

    pub fn sigma_sq(&self) -> Option<f64> {
        self.sigma_star_sq.map(|c| c.value)
    }
}

/// A known solution together with the residual tolerance it was certified at.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub point: Vec<f64>,
    pub tolerance: f64,
    /// Step used in the natural residual when certifying.
    pub gamma: f64,
}

/// Extrema of the sampled Lipschitz ratios and monotonicity quotients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledConstants {
    pub lipschitz: f64,
    pub monotonicity: f64,
}

#[derive(Clone)]
pub struct FiniteSumVI {
    family: Arc<dyn ComponentFamily>,
    regularizer: ProxKind,
    constants: Constants,
    reference: Option<Reference>,
    primal_len: Option<usize>,
}

impl core::fmt::Debug for FiniteSumVI {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FiniteSumVI")
            .field("dim", &self.dim())
            .field("components", &self.len())
            .field("regularizer", &self.regularizer)
            .field("constants", &self.constants)
            .field("has_reference", &self.reference.is_some())
            .finish()
    }
}

impl FiniteSumVI {
    pub fn new(family: Arc<dyn ComponentFamily>, regularizer: ProxKind) -> Result<Self> {
        if family.len() == 0 {
            return Err(Error::EmptyProblem);
        }
        if family.dim() == 0 {
            return Err(invalid("dim", "dimension must be positive"));
        }
        regularizer.validate(family.dim())?;
        Ok(Self {
            family,
            regularizer,
            constants: Constants::default(),
            reference: None,
            primal_len: None,
        })
    }

    pub fn with_constants(mut self, constants: Constants) -> Result<Self> {
        constants.validate()?;
        self.constants = constants;
        Ok(self)
    }

    pub fn with_blocks(mut self, primal_len: usize) -> Result<Self> {
        if primal_len > self.dim() {
            return Err(invalid(
                "primal_len",
                "primal block longer than the problem dimension",
            ));
        }
        self.primal_len = Some(primal_len);
        Ok(self)
    }

    /// Attaches a solution after checking `natural_residual(point, gamma) ≤ tolerance`.
    pub fn with_reference(mut self, point: Vec<f64>, tolerance: f64, gamma: f64) -> Result<Self> {
        let residual = self.natural_residual(&point, gamma)?;
        if !(residual <= tolerance) {
            return Err(Error::ReferenceRejected {
                residual,
                tolerance,
            });
        }
        self.reference = Some(Reference {
            point,
            tolerance,
            gamma,
        });
        Ok(self)
    }

    pub fn without_reference(mut self) -> Self {
        self.reference = None;
        self
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Number of components `n`.
    pub fn len(&self) -> usize {
        self.family.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn family(&self) -> &Arc<dyn ComponentFamily> {
        &self.family
    }

    pub fn regularizer(&self) -> &ProxKind {
        &self.regularizer
    }

    pub fn constants(&self) -> &Constants {
        &self.constants
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    pub fn primal_len(&self) -> Option<usize> {
        self.primal_len
    }

    pub fn point(&self, coords: Vec<f64>) -> Point {
        Point::from_parts(coords, self.primal_len)
    }

    /// `F_i(z)`.
    pub fn evaluate_component(&self, i: usize, z: &[f64]) -> Result<Point> {
        self.check_index(i)?;
        check_dim(self.dim(), z.len())?;
        let mut out = vec![0.0; self.dim()];
        self.family.eval_into(i, z, &mut out);
        Ok(self.point(out))
    }

    /// `F(z) = (1/n) Σ_i F_i(z)`, summed in ascending component order.
    pub fn evaluate_full(&self, z: &[f64]) -> Result<Point> {
        check_dim(self.dim(), z.len())?;
        let mut out = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        self.full_into(z, &mut out, &mut scratch);
        Ok(self.point(out))
    }

    pub(crate) fn full_into(&self, z: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..self.len() {
            self.family.accumulate_into(i, z, out, scratch);
        }
        let n = self.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
    }

    /// `‖z − prox_{γg}(z − γF(z))‖`, zero exactly at solutions.
    pub fn natural_residual(&self, z: &[f64], gamma: f64) -> Result<f64> {
        if !(gamma > 0.0) {
            return Err(invalid("gamma", "step must be positive"));
        }
        check_dim(self.dim(), z.len())?;
        let mut f = vec![0.0; self.dim()];
        let mut scratch = vec![0.0; self.dim()];
        Ok(self.residual_with(z, gamma, &mut f, &mut scratch))
    }

    pub(crate) fn residual_with(
        &self,
        z: &[f64],
        gamma: f64,
        f: &mut [f64],
        scratch: &mut [f64],
    ) -> f64 {
        self.full_into(z, f, scratch);
        for (s, (zi, fi)) in scratch.iter_mut().zip(z.iter().zip(f.iter())) {
            *s = zi - gamma * fi;
        }
        self.regularizer.apply_unchecked(gamma, scratch);
        linalg::norm_diff(z, scratch)
    }

    /// Samples `pairs` point pairs uniformly from the box `center ± radius` and
    /// returns the largest `‖F_i(a) − F_i(b)‖ / ‖a − b‖` and the smallest
    /// `⟨F_i(a) − F_i(b), a − b⟩ / ‖a − b‖²`. Pair `k` tests component `k mod n`.
    pub fn sample_constants(
        &self,
        pairs: usize,
        seed: u64,
        center: Option<&[f64]>,
        radius: f64,
    ) -> Result<SampledConstants> {
        self.sample_constants_with(pairs, seed, center, radius, false)
    }

    /// As [`FiniteSumVI::sample_constants`] but for the full operator `F`.
    pub fn sample_full_constants(
        &self,
        pairs: usize,
        seed: u64,
        center: Option<&[f64]>,
        radius: f64,
    ) -> Result<SampledConstants> {
        self.sample_constants_with(pairs, seed, center, radius, true)
    }

    fn sample_constants_with(
        &self,
        pairs: usize,
        seed: u64,
        center: Option<&[f64]>,
        radius: f64,
        full: bool,
    ) -> Result<SampledConstants> {
        let d = self.dim();
        if let Some(c) = center {
            check_dim(d, c.len())?;
        }
        if pairs == 0 || !(radius > 0.0) {
            return Err(invalid(
                "pairs",
                "need at least one pair and a positive radius",
            ));
        }
        let mut rng = SeededRng::new(seed, stream::AUDIT);
        let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
        let (mut fa, mut fb, mut scratch) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
        let mut lipschitz = 0.0f64;
        let mut monotonicity = f64::INFINITY;
        for k in 0..pairs {
            for j in 0..d {
                let c = center.map_or(0.0, |c| c[j]);
                a[j] = c + rng.uniform(-radius, radius);
                b[j] = c + rng.uniform(-radius, radius);
            }
            if full {
                self.full_into(&a, &mut fa, &mut scratch);
                self.full_into(&b, &mut fb, &mut scratch);
            } else {
                let i = k % self.len();
                self.family.eval_into(i, &a, &mut fa);
                self.family.eval_into(i, &b, &mut fb);
            }
            let dz = linalg::sq_dist(&a, &b);
            if dz == 0.0 {
                continue;
            }
            let df = linalg::sq_dist(&fa, &fb);
            let inner: f64 = fa
                .iter()
                .zip(&fb)
                .zip(a.iter().zip(&b))
                .map(|((x, y), (p, q))| (x - y) * (p - q))
                .sum();
            lipschitz = lipschitz.max(libm::sqrt(df / dz));
            monotonicity = monotonicity.min(inner / dz);
        }
        Ok(SampledConstants {
            lipschitz,
            monotonicity,
        })
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.len(),
            })
        }
    }
}
