//! Adversarially robust least squares.
//!
//! `min_w max_{‖r_j‖ ≤ D} 1/(2N) Σ_j (w·(x_j + r_j) − y_j)² + λ/2‖w‖² − β/2‖r‖²`
//! over `z = (w, r_1, …, r_N)`. Samples are split into contiguous batches (the
//! last one may be shorter), one component per batch. With `e_j = w·(x_j + r_j) − y_j`
//! and `n` batches, component `i` is
//!
//! * `w` block: `(n/N) Σ_{j∈B_i} e_j (x_j + r_j) + λw`,
//! * `r_j` block for `j ∈ B_i`: `n(β r_j − e_j w / N)`,
//! * zero on the other perturbations,
//!
//! so the mean over components is `(∇_w f, −∇_r f)` exactly for any batch sizes.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::ops::Range;

use crate::dataset::SparseDataset;
use crate::error::{check_dim, invalid, Error, Result};
use crate::problem::{ComponentFamily, Constant, Constants, FiniteSumVI, SampledConstants};
use crate::prox::ProxKind;

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialSpec {
    pub data: SparseDataset,
    pub lambda: f64,
    pub beta: f64,
    pub radius: f64,
    pub batch: usize,
}

#[derive(Debug, Clone)]
pub struct AdversarialFamily {
    data: SparseDataset,
    lambda: f64,
    beta: f64,
    batches: Vec<Range<usize>>,
}

impl AdversarialFamily {
    pub fn new(spec: &AdversarialSpec) -> Result<Self> {
        let n_samples = spec.data.len();
        if n_samples == 0 {
            return Err(Error::EmptyDataset);
        }
        if spec.batch == 0 || spec.batch > n_samples {
            return Err(Error::BatchTooLarge {
                batch: spec.batch,
                samples: n_samples,
            });
        }
        if !(spec.lambda > 0.0) || !(spec.beta > 0.0) {
            return Err(invalid("lambda", "λ and β must be positive"));
        }
        let batches = (0..n_samples)
            .step_by(spec.batch)
            .map(|s| s..(s + spec.batch).min(n_samples))
            .collect();
        Ok(Self {
            data: spec.data.clone(),
            lambda: spec.lambda,
            beta: spec.beta,
            batches,
        })
    }

    pub fn features(&self) -> usize {
        self.data.dim()
    }

    pub fn samples(&self) -> usize {
        self.data.len()
    }

    pub fn batches(&self) -> &[Range<usize>] {
        &self.batches
    }

    fn perturbation<'a>(&self, z: &'a [f64], j: usize) -> &'a [f64] {
        let d = self.features();
        &z[d + j * d..d + (j + 1) * d]
    }

    fn residual(&self, z: &[f64], j: usize) -> f64 {
        let d = self.features();
        let w = &z[..d];
        let r = self.perturbation(z, j);
        let wr: f64 = w.iter().zip(r).map(|(a, b)| a * b).sum();
        self.data.rows()[j].dot(w) + wr - self.data.labels()[j]
    }

    /// Primal block of component `i` into `buf[..d]`.
    fn primal_into(&self, i: usize, z: &[f64], buf: &mut [f64]) {
        let d = self.features();
        let n = self.batches.len() as f64;
        let big_n = self.samples() as f64;
        buf[..d].iter_mut().for_each(|b| *b = 0.0);
        for j in self.batches[i].clone() {
            let coef = n / big_n * self.residual(z, j);
            for (b, r) in buf[..d].iter_mut().zip(self.perturbation(z, j)) {
                *b += coef * r;
            }
            for &(k, v) in &self.data.rows()[j].entries {
                buf[k] += coef * v;
            }
        }
        for (b, w) in buf[..d].iter_mut().zip(&z[..d]) {
            *b += self.lambda * w;
        }
    }

    fn dual_into(&self, i: usize, z: &[f64], mut emit: impl FnMut(usize, f64)) {
        let d = self.features();
        let n = self.batches.len() as f64;
        let big_n = self.samples() as f64;
        let w = &z[..d];
        for j in self.batches[i].clone() {
            let e = self.residual(z, j);
            let r = self.perturbation(z, j);
            for k in 0..d {
                emit(d + j * d + k, n * (self.beta * r[k] - e * w[k] / big_n));
            }
        }
    }

    /// Smooth objective value at `z` (the ball constraint is not included).
    pub fn objective(&self, z: &[f64]) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        let d = self.features();
        let big_n = self.samples() as f64;
        let fit: f64 = (0..self.samples())
            .map(|j| {
                let e = self.residual(z, j);
                e * e
            })
            .sum();
        let ww: f64 = z[..d].iter().map(|w| w * w).sum();
        let rr: f64 = z[d..].iter().map(|r| r * r).sum();
        Ok(fit / (2.0 * big_n) + 0.5 * self.lambda * ww - 0.5 * self.beta * rr)
    }
}

impl ComponentFamily for AdversarialFamily {
    fn dim(&self) -> usize {
        self.features() * (1 + self.samples())
    }

    fn len(&self) -> usize {
        self.batches.len()
    }

    fn eval_into(&self, i: usize, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.primal_into(i, z, out);
        self.dual_into(i, z, |k, v| out[k] = v);
    }

    fn accumulate_into(&self, i: usize, z: &[f64], acc: &mut [f64], scratch: &mut [f64]) {
        let d = self.features();
        self.primal_into(i, z, scratch);
        for (a, s) in acc[..d].iter_mut().zip(&scratch[..d]) {
            *a += *s;
        }
        self.dual_into(i, z, |k, v| acc[k] += v);
    }
}

/// Pairs used by the builder's constant audit.
pub const AUDIT_PAIRS: usize = 64;

/// Builds the problem with `g = (0, ball of radius D on every r_j)`.
///
/// The operator is only locally Lipschitz, so constants are sampled on the box
/// `[−1, 1]^dim`: `L` is the largest component ratio and `μ` the smallest full
/// operator quotient, stored only when positive (see [`audit_adversarial`]).
pub fn make_adversarial(spec: &AdversarialSpec) -> Result<FiniteSumVI> {
    if !(spec.radius >= 0.0) {
        return Err(invalid("radius", "must be non-negative"));
    }
    let fam = AdversarialFamily::new(spec)?;
    let d = fam.features();
    let reg = ProxKind::product(
        d,
        ProxKind::Zero,
        ProxKind::BallIndicator {
            radius: spec.radius,
            block_len: d,
        },
    );
    let problem = FiniteSumVI::new(Arc::new(fam), reg)?.with_blocks(d)?;
    let audit = audit_adversarial(&problem)?;
    let constants = Constants {
        lipschitz: Some(Constant::sampled(audit.lipschitz)),
        strong_monotonicity: (audit.monotonicity > 0.0)
            .then(|| Constant::sampled(audit.monotonicity.min(audit.lipschitz))),
        sigma_star_sq: None,
    };
    problem.with_constants(constants)
}

/// Sampled component Lipschitz ratio and full-operator monotonicity quotient.
/// A non-positive quotient means `β` is too small for strong concavity.
pub fn audit_adversarial(problem: &FiniteSumVI) -> Result<SampledConstants> {
    let pairs = AUDIT_PAIRS.max(2 * problem.len());
    let comp = problem.sample_constants(pairs, 0, None, 1.0)?;
    let full = problem.sample_full_constants(AUDIT_PAIRS, 0, None, 1.0)?;
    Ok(SampledConstants {
        lipschitz: comp.lipschitz,
        monotonicity: full.monotonicity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SparseRow;
    use crate::rng::SeededRng;
    use alloc::vec;

    fn small(batch: usize, seed: u64) -> AdversarialSpec {
        AdversarialSpec {
            data: SparseDataset::synthetic_regression(7, 4, 0.6, 0.1, seed).unwrap(),
            lambda: 0.3,
            beta: 2.0,
            radius: 0.5,
            batch,
        }
    }

    /// Direct transcription of the objective with dense vectors.
    fn objective_oracle(spec: &AdversarialSpec, z: &[f64]) -> f64 {
        let d = spec.data.dim();
        let n = spec.data.len();
        let mut total = 0.0;
        for j in 0..n {
            let mut x = vec![0.0; d];
            for &(k, v) in &spec.data.rows()[j].entries {
                x[k] = v;
            }
            let mut pred = 0.0;
            for k in 0..d {
                pred += z[k] * (x[k] + z[d + j * d + k]);
            }
            total += (pred - spec.data.labels()[j]).powi(2);
        }
        let ww: f64 = z[..d].iter().map(|v| v * v).sum();
        let rr: f64 = z[d..].iter().map(|v| v * v).sum();
        total / (2.0 * n as f64) + spec.lambda / 2.0 * ww - spec.beta / 2.0 * rr
    }

    #[test]
    fn zero_point_with_zero_labels_is_stationary() {
        let mut spec = small(2, 1);
        let rows = spec.data.rows().to_vec();
        spec.data = SparseDataset::new(rows, vec![0.0; 7], Some(4)).unwrap();
        let p = make_adversarial(&spec).unwrap();
        let f = p.evaluate_full(&vec![0.0; p.dim()]).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn objective_matches_oracle() {
        let spec = small(3, 2);
        let fam = AdversarialFamily::new(&spec).unwrap();
        let mut rng = SeededRng::new(3, 0);
        let z: Vec<f64> = (0..fam.dim()).map(|_| rng.normal()).collect();
        assert!((fam.objective(&z).unwrap() - objective_oracle(&spec, &z)).abs() < 1e-12);
    }

    #[test]
    fn operator_matches_central_differences() {
        for batch in [1, 3, 7] {
            let spec = small(batch, 4);
            let p = make_adversarial(&spec).unwrap();
            let mut rng = SeededRng::new(batch as u64, 0);
            let d = spec.data.dim();
            for _ in 0..10 {
                let mut z: Vec<f64> = (0..p.dim()).map(|_| rng.normal()).collect();
                let f = p.evaluate_full(&z).unwrap();
                let h = 1e-6;
                for c in 0..z.len() {
                    let orig = z[c];
                    z[c] = orig + h;
                    let up = objective_oracle(&spec, &z);
                    z[c] = orig - h;
                    let down = objective_oracle(&spec, &z);
                    z[c] = orig;
                    let mut fd = (up - down) / (2.0 * h);
                    if c >= d {
                        fd = -fd;
                    }
                    assert!(
                        (fd - f[c]).abs() <= 1e-6 * f[c].abs().max(1.0),
                        "{c}: {fd} vs {}",
                        f[c]
                    );
                }
            }
        }
    }

    #[test]
    fn accumulate_matches_default_sum() {
        let spec = small(3, 5);
        let p = make_adversarial(&spec).unwrap();
        let fam = p.family();
        let mut rng = SeededRng::new(6, 0);
        let z: Vec<f64> = (0..p.dim()).map(|_| rng.normal()).collect();
        let (mut a, mut b, mut s) = (vec![0.0; p.dim()], vec![0.0; p.dim()], vec![0.0; p.dim()]);
        for i in 0..fam.len() {
            fam.accumulate_into(i, &z, &mut a, &mut s);
            fam.eval_into(i, &z, &mut s);
            b.iter_mut().zip(&s).for_each(|(x, y)| *x += y);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn zero_radius_reduces_to_ridge() {
        let data = SparseDataset::new(
            vec![SparseRow::new(vec![(0, 1.0)]).unwrap()],
            vec![0.0],
            None,
        )
        .unwrap();
        let spec = AdversarialSpec {
            data,
            lambda: 1.0,
            beta: 1.0,
            radius: 0.0,
            batch: 1,
        };
        let p = make_adversarial(&spec).unwrap();
        let mut z = vec![3.0, 0.7];
        for _ in 0..500 {
            z = crate::solver::full_eg_step(&p, &z, 0.1).unwrap().into_vec();
        }
        assert!(z[0].abs() < 1e-10 && z[1] == 0.0);
    }

    #[test]
    fn batches_and_errors() {
        let fam = AdversarialFamily::new(&small(3, 1)).unwrap();
        assert_eq!(fam.batches(), &[0..3, 3..6, 6..7]);
        assert!(matches!(
            AdversarialFamily::new(&small(8, 1)),
            Err(Error::BatchTooLarge {
                batch: 8,
                samples: 7
            })
        ));
        assert!(make_adversarial(&AdversarialSpec {
            radius: -1.0,
            ..small(2, 1)
        })
        .is_err());
    }

    #[test]
    fn audit_flags_small_beta() {
        let mut spec = small(1, 7);
        assert!(make_adversarial(&spec).unwrap().constants().mu().is_some());
        spec.beta = 1e-3;
        spec.lambda = 1e-3;
        let p = make_adversarial(&spec).unwrap();
        assert!(audit_adversarial(&p).unwrap().monotonicity <= 0.0);
        assert!(p.constants().mu().is_none());
    }

    #[test]
    fn projected_probes_do_not_improve_solution() {
        let spec = small(7, 8);
        let p = make_adversarial(&spec).unwrap();
        let mut z = vec![0.0; p.dim()];
        for _ in 0..20_000 {
            z = crate::solver::full_eg_step(&p, &z, 0.05)
                .unwrap()
                .into_vec();
        }
        assert!(p.natural_residual(&z, 1.0).unwrap() < 1e-10);
        let d = spec.data.dim();
        let base = objective_oracle(&spec, &z);
        let mut rng = SeededRng::new(9, 0);
        for _ in 0..200 {
            let dir: Vec<f64> = (0..p.dim()).map(|_| rng.normal()).collect();
            for t in [1e-3, 1e-2, 1e-1] {
                // primal probe: w moves, r fixed
                let mut zw = z.clone();
                zw[..d].iter_mut().zip(&dir).for_each(|(a, b)| *a += t * b);
                assert!(objective_oracle(&spec, &zw) >= base - 1e-8);
                // dual probe: r moves and is projected back onto the balls
                let mut zr = z.clone();
                zr[d..]
                    .iter_mut()
                    .zip(&dir[d..])
                    .for_each(|(a, b)| *a += t * b);
                let zr = p.regularizer().prox(1.0, &zr).unwrap();
                assert!(objective_oracle(&spec, &zr) <= base + 1e-8);
            }
        }
    }
}
