//! Affine components `F_i(z) = M_i z + c_i` with certified constants.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{self, symmetric_eigenvalues, DenseMatrix};
use crate::problem::{ComponentFamily, Constant, Constants, FiniteSumVI};
use crate::prox::ProxKind;
use crate::rng::{stream, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct AffineFamily {
    dim: usize,
    matrices: Vec<DenseMatrix>,
    offsets: Vec<Vec<f64>>,
}

impl AffineFamily {
    pub fn new(matrices: Vec<DenseMatrix>, offsets: Vec<Vec<f64>>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::EmptyProblem);
        }
        check_dim(matrices.len(), offsets.len())?;
        let dim = matrices[0].rows();
        for (m, c) in matrices.iter().zip(&offsets) {
            check_dim(dim, m.rows())?;
            check_dim(dim, m.cols())?;
            check_dim(dim, c.len())?;
        }
        Ok(Self {
            dim,
            matrices,
            offsets,
        })
    }

    pub fn matrices(&self) -> &[DenseMatrix] {
        &self.matrices
    }

    pub fn offsets(&self) -> &[Vec<f64>] {
        &self.offsets
    }

    pub fn mean_matrix(&self) -> DenseMatrix {
        let n = self.matrices.len() as f64;
        let mut acc = DenseMatrix::zeros(self.dim, self.dim);
        for m in &self.matrices {
            acc = acc.add(m);
        }
        acc.scaled(1.0 / n)
    }

    pub fn mean_offset(&self) -> Vec<f64> {
        let n = self.offsets.len() as f64;
        let mut acc = vec![0.0; self.dim];
        for c in &self.offsets {
            acc.iter_mut().zip(c).for_each(|(a, v)| *a += v);
        }
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Largest spectral norm over the components.
    pub fn lipschitz(&self) -> f64 {
        self.matrices
            .iter()
            .map(DenseMatrix::spectral_norm)
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the symmetric parts over the components.
    pub fn strong_monotonicity(&self) -> f64 {
        self.matrices
            .iter()
            .map(|m| symmetric_eigenvalues(&m.symmetric_part())[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// `z* = −M̄⁻¹ c̄`, the unconstrained solution.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.mean_offset().iter().map(|c| -c).collect();
        self.mean_matrix().solve(&rhs)
    }

    /// Wraps into an unconstrained problem with analytic `L`, `μ`, the solution
    /// and `σ*² = max(mean_i ‖F_i(z*)‖², ‖F(z*)‖²)`.
    pub fn into_problem(self) -> Result<FiniteSumVI> {
        let l = self.lipschitz();
        let mu = self.strong_monotonicity();
        let solution = self.solve()?;
        let n = self.matrices.len() as f64;
        let mut mean_sq = 0.0;
        let mut full = vec![0.0; self.dim];
        let mut out = vec![0.0; self.dim];
        for i in 0..self.matrices.len() {
            self.eval_into(i, &solution, &mut out);
            mean_sq += linalg::sq_norm(&out);
            full.iter_mut().zip(&out).for_each(|(f, o)| *f += o);
        }
        mean_sq /= n;
        full.iter_mut().for_each(|f| *f /= n);
        let sigma = mean_sq.max(linalg::sq_norm(&full));
        let scale = 1.0 + linalg::norm(&self.mean_offset()) + l * linalg::norm(&solution);
        let constants = Constants {
            lipschitz: Some(Constant::analytic(l)),
            strong_monotonicity: if mu >= 0.0 {
                Some(Constant::analytic(mu.min(l)))
            } else {
                None
            },
            sigma_star_sq: Some(Constant::analytic(sigma)),
        };
        FiniteSumVI::new(Arc::new(self), ProxKind::Zero)?
            .with_constants(constants)?
            .with_reference(solution, 1e-10 * scale, 1.0)
    }
}

impl ComponentFamily for AffineFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn len(&self) -> usize {
        self.matrices.len()
    }

    fn eval_into(&self, i: usize, z: &[f64], out: &mut [f64]) {
        let m = &self.matrices[i];
        for (r, (o, c)) in out.iter_mut().zip(&self.offsets[i]).enumerate() {
            *o = linalg::dot(m.row(r), z) + c;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineSaddleSpec {
    pub dim: usize,
    pub components: usize,
    pub mu: f64,
    pub lipschitz: f64,
    pub seed: u64,
}

fn random_orthogonal(d: usize, rng: &mut SeededRng) -> DenseMatrix {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        for _ in 0..2 {
            for c in &cols {
                let proj = linalg::dot(&v, c);
                v.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let nrm = linalg::norm(&v);
        if nrm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nrm);
            cols.push(v);
        }
    }
    let mut q = DenseMatrix::zeros(d, d);
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            q[(i, j)] = *v;
        }
    }
    q
}

/// Random direction `B = S + A` with `S` symmetric PSD having a zero eigenvalue,
/// `A` antisymmetric, normalised to spectral norm 1.
fn random_direction(d: usize, rng: &mut SeededRng) -> DenseMatrix {
    let q = random_orthogonal(d, rng);
    let mut diag = DenseMatrix::zeros(d, d);
    for k in 1..d {
        diag[(k, k)] = rng.unit();
    }
    let s = q.matmul(&diag).matmul(&q.transpose());
    let mut a = DenseMatrix::zeros(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let v = rng.normal() / libm::sqrt(d as f64);
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    let b = s.add(&a);
    let nrm = b.spectral_norm();
    if nrm > 0.0 {
        b.scaled(1.0 / nrm)
    } else {
        b
    }
}

/// Builds `F_i(z) = M_i z + c_i` with `M_i = μI + t·B_i` where every `B_i` has a
/// PSD symmetric part with a zero eigenvalue, so each `M_i` is exactly
/// `μ`-strongly monotone; `t` is chosen by a bracketed root search so that `max_i ‖M_i‖₂` reaches `L`.
pub fn make_affine_saddle(spec: &AffineSaddleSpec) -> Result<FiniteSumVI> {
    let AffineSaddleSpec {
        dim,
        components,
        mu,
        lipschitz,
        seed,
    } = *spec;
    if dim == 0 || components == 0 {
        return Err(invalid(
            "dim",
            "dimension and component count must be positive",
        ));
    }
    if !(mu > 0.0 && mu <= lipschitz) {
        return Err(invalid("mu", "need 0 < mu <= L"));
    }
    let mut rng = SeededRng::new(seed, stream::BUILDER);
    let dirs: Vec<DenseMatrix> = (0..components)
        .map(|_| random_direction(dim, &mut rng))
        .collect();
    let build = |t: f64| -> Vec<DenseMatrix> {
        dirs.iter()
            .map(|b| DenseMatrix::identity(dim).scaled(mu).add(&b.scaled(t)))
            .collect()
    };
    let max_norm = |t: f64| {
        build(t)
            .iter()
            .map(DenseMatrix::spectral_norm)
            .fold(0.0, f64::max)
    };
    // max_i ‖M_i(t)‖ is convex and non-decreasing in t ≥ 0 and reaches L by t = L + μ.
    let gap = |t: f64| max_norm(t) - lipschitz;
    let (mut lo, mut hi) = (0.0, lipschitz + mu);
    if lipschitz > mu {
        let (mut glo, mut ghi) = (mu - lipschitz, gap(hi));
        let mut last_side = 0;
        for _ in 0..200 {
            if hi - lo <= 1e-15 * hi || ghi <= glo {
                break;
            }
            let mut mid = (lo * ghi - hi * glo) / (ghi - glo);
            if !(mid > lo && mid < hi) {
                mid = 0.5 * (lo + hi);
            }
            let g = gap(mid);
            if g <= 0.0 {
                lo = mid;
                glo = g;
                if last_side == -1 {
                    ghi *= 0.5;
                }
                last_side = -1;
            } else {
                hi = mid;
                ghi = g;
                if last_side == 1 {
                    glo *= 0.5;
                }
                last_side = 1;
            }
            if g.abs() <= 1e-14 * lipschitz {
                break;
            }
        }
    }
    let matrices = build(lo);
    let offsets: Vec<Vec<f64>> = (0..components)
        .map(|_| (0..dim).map(|_| rng.normal()).collect())
        .collect();
    AffineFamily::new(matrices, offsets)?.into_problem()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_component_solution() {
        let fam = AffineFamily::new(vec![DenseMatrix::identity(2)], vec![vec![-1.0, 0.0]]).unwrap();
        let p = fam.into_problem().unwrap();
        let z = &p.reference().unwrap().point;
        assert!((z[0] - 1.0).abs() < 1e-15 && z[1].abs() < 1e-15);
        assert_eq!(p.constants().sigma_sq(), Some(0.0));
    }

    #[test]
    fn built_constants_hit_targets_and_solution_is_exact() {
        let spec = AffineSaddleSpec {
            dim: 12,
            components: 5,
            mu: 0.5,
            lipschitz: 6.0,
            seed: 9,
        };
        let p = make_affine_saddle(&spec).unwrap();
        let c = p.constants();
        assert!((c.l().unwrap() - 6.0).abs() < 1e-9);
        assert!((c.mu().unwrap() - 0.5).abs() < 1e-9);
        assert!(c.sigma_sq().unwrap() > 0.0);
        let z = &p.reference().unwrap().point;
        let f = p.evaluate_full(z).unwrap();
        assert!(f.norm() < 1e-10);
    }

    #[test]
    fn monotonicity_audit_on_built_instance() {
        let spec = AffineSaddleSpec {
            dim: 10,
            components: 4,
            mu: 1.0,
            lipschitz: 5.0,
            seed: 3,
        };
        let p = make_affine_saddle(&spec).unwrap();
        let s = p.sample_constants(1000, 11, None, 3.0).unwrap();
        let (l, mu) = (p.constants().l().unwrap(), p.constants().mu().unwrap());
        assert!(s.lipschitz <= l * (1.0 + 1e-9));
        assert!(s.monotonicity >= mu - 1e-9);
    }

    #[test]
    fn mu_equal_l_gives_scaled_identity() {
        let spec = AffineSaddleSpec {
            dim: 3,
            components: 2,
            mu: 2.0,
            lipschitz: 2.0,
            seed: 1,
        };
        let p = make_affine_saddle(&spec).unwrap();
        assert!((p.constants().l().unwrap() - 2.0).abs() < 1e-12);
        assert!(make_affine_saddle(&AffineSaddleSpec { mu: 3.0, ..spec }).is_err());
    }
}
