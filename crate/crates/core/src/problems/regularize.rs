use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Result};
use crate::problem::{ComponentFamily, Constant, ConstantSource, Constants, FiniteSumVI};

/// `F_i(z) + μ(z − z₀)` on top of another family.
pub struct RegularizedFamily {
    inner: Arc<dyn ComponentFamily>,
    mu: f64,
    anchor: Vec<f64>,
}

impl ComponentFamily for RegularizedFamily {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn len(&self) -> usize {
        self.inner.len()
    }

    fn eval_into(&self, i: usize, z: &[f64], out: &mut [f64]) {
        self.inner.eval_into(i, z, out);
        for ((o, zi), ai) in out.iter_mut().zip(z).zip(&self.anchor) {
            *o += self.mu * (zi - ai);
        }
    }
}

/// Adds `μ_reg(z − z₀)` to every component, making a monotone problem
/// `μ_reg`-strongly monotone. `L` and `μ` shift by `μ_reg`; any stored solution
/// and `σ*²` are dropped since they no longer apply.
pub fn regularize_operator(
    problem: &FiniteSumVI,
    mu_reg: f64,
    anchor: &[f64],
) -> Result<FiniteSumVI> {
    if !(mu_reg > 0.0) || !mu_reg.is_finite() {
        return Err(invalid("mu_reg", "must be positive"));
    }
    check_dim(problem.dim(), anchor.len())?;
    let fam = RegularizedFamily {
        inner: problem.family().clone(),
        mu: mu_reg,
        anchor: anchor.to_vec(),
    };
    let shift = |c: Option<Constant>| Constant {
        value: c.map_or(0.0, |c| c.value) + mu_reg,
        source: ConstantSource::Derived,
    };
    let old = problem.constants();
    let constants = Constants {
        lipschitz: old.lipschitz.map(|c| shift(Some(c))),
        strong_monotonicity: Some(shift(old.strong_monotonicity)),
        sigma_star_sq: None,
    };
    let mut out = FiniteSumVI::new(Arc::new(fam), problem.regularizer().clone())?
        .with_constants(constants)?;
    if let Some(p) = problem.primal_len() {
        out = out.with_blocks(p)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problem::FnFamily;
    use crate::problems::affine::AffineFamily;
    use crate::prox::ProxKind;
    use alloc::vec;

    fn bilinear() -> FiniteSumVI {
        let fam = FnFamily::new(2, 1, |_, z: &[f64], out: &mut [f64]| {
            out[0] = z[1];
            out[1] = -z[0];
        });
        let c = Constants {
            lipschitz: Some(Constant::analytic(1.0)),
            strong_monotonicity: Some(Constant::analytic(0.0)),
            sigma_star_sq: None,
        };
        FiniteSumVI::new(Arc::new(fam), ProxKind::Zero)
            .unwrap()
            .with_constants(c)
            .unwrap()
    }

    #[test]
    fn tiny_regularisation_is_nearly_identity() {
        let p = bilinear();
        let r = regularize_operator(&p, 1e-15, &[0.3, -0.2]).unwrap();
        let z = [1.5, -2.0];
        let a = p.evaluate_full(&z).unwrap();
        let b = r.evaluate_full(&z).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-12));
        assert!(regularize_operator(&p, 0.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn bilinear_becomes_strongly_monotone() {
        let r = regularize_operator(&bilinear(), 0.1, &[0.0, 0.0]).unwrap();
        assert!((r.constants().mu().unwrap() - 0.1).abs() < 1e-15);
        assert!((r.constants().l().unwrap() - 1.1).abs() < 1e-15);
        assert_eq!(
            r.constants().strong_monotonicity.unwrap().source,
            ConstantSource::Derived
        );
        let s = r.sample_constants(1000, 1, None, 2.0).unwrap();
        assert!(s.monotonicity >= 0.1 - 1e-12);
    }

    #[test]
    fn solution_moves_toward_anchor() {
        let m = DenseMatrix::from_row_major(2, 2, vec![1.0, 2.0, -2.0, 1.0]).unwrap();
        let c = vec![1.0, -1.0];
        let p = AffineFamily::new(vec![m.clone()], vec![c.clone()])
            .unwrap()
            .into_problem()
            .unwrap();
        assert!(p.reference().is_some());
        let anchor = [3.0, 4.0];
        let mut prev = f64::INFINITY;
        for mu in [0.1, 1.0, 10.0, 100.0] {
            let r = regularize_operator(&p, mu, &anchor).unwrap();
            assert!(r.reference().is_none());
            // (M + μI) z = μ z₀ − c
            let lhs = m.add(&DenseMatrix::identity(2).scaled(mu));
            let rhs: Vec<f64> = anchor.iter().zip(&c).map(|(a, ci)| mu * a - ci).collect();
            let z = lhs.solve(&rhs).unwrap();
            assert!(r.natural_residual(&z, 1.0).unwrap() < 1e-12);
            let dist = crate::linalg::sq_dist(&z, &anchor);
            assert!(dist < prev);
            prev = dist;
        }
    }
}
