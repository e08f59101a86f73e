//! Proximal operators: `prox_{γg}(z) = argmin_y g(y) + ‖y − z‖² / (2γ)`.
//!
//! Only the regularisers the problems need are here: the zero function, a
//! squared distance to an anchor, the indicator of a product of Euclidean balls
//! (one ball per contiguous sub-vector), and a primal/dual product of two of
//! those.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub enum ProxKind {
    /// `g ≡ 0`.
    Zero,
    /// `g(y) = λ/2 ‖y − anchor‖²`.
    SqDistance { lambda: f64, anchor: Vec<f64> },
    /// Indicator of `{y : ‖y_k‖ ≤ radius}` where `y_k` are consecutive chunks of
    /// `block_len` coordinates (per-pixel 2-vectors, per-sample perturbations).
    BallIndicator { radius: f64, block_len: usize },
    /// `g(x, y) = g₁(x) + g₂(y)` with `x` the first `primal_len` coordinates.
    Product {
        primal_len: usize,
        primal: Box<ProxKind>,
        dual: Box<ProxKind>,
    },
}

impl ProxKind {
    pub fn product(primal_len: usize, primal: ProxKind, dual: ProxKind) -> Self {
        ProxKind::Product {
            primal_len,
            primal: Box::new(primal),
            dual: Box::new(dual),
        }
    }

    /// Checks parameters and that the kind fits a vector of length `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ProxKind::Zero => Ok(()),
            ProxKind::SqDistance { lambda, anchor } => {
                if !(*lambda > 0.0) {
                    return Err(invalid("lambda", "must be positive"));
                }
                check_dim(dim, anchor.len())
            }
            ProxKind::BallIndicator { radius, block_len } => {
                if !(*radius >= 0.0) {
                    return Err(invalid("radius", "must be non-negative"));
                }
                if *block_len == 0 || !dim.is_multiple_of(*block_len) {
                    return Err(Error::BlockStructure(format!(
                        "length {dim} is not a whole number of {block_len}-vectors"
                    )));
                }
                Ok(())
            }
            ProxKind::Product {
                primal_len,
                primal,
                dual,
            } => {
                if *primal_len > dim {
                    return Err(Error::BlockStructure(format!(
                        "primal block {primal_len} longer than point {dim}"
                    )));
                }
                primal.validate(*primal_len)?;
                dual.validate(dim - primal_len)
            }
        }
    }

    /// `z ← prox_{γg}(z)`.
    pub fn apply_in_place(&self, gamma: f64, z: &mut [f64]) -> Result<()> {
        if !(gamma > 0.0) {
            return Err(invalid("gamma", "step must be positive"));
        }
        self.validate(z.len())?;
        self.apply_unchecked(gamma, z);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&self, gamma: f64, z: &mut [f64]) {
        match self {
            ProxKind::Zero => {}
            ProxKind::SqDistance { lambda, anchor } => {
                let gl = gamma * lambda;
                let denom = 1.0 + gl;
                for (zi, ai) in z.iter_mut().zip(anchor) {
                    *zi = (*zi + gl * ai) / denom;
                }
            }
            ProxKind::BallIndicator { radius, block_len } => project_chunks(*radius, *block_len, z),
            ProxKind::Product {
                primal_len,
                primal,
                dual,
            } => {
                let (x, y) = z.split_at_mut(*primal_len);
                primal.apply_unchecked(gamma, x);
                dual.apply_unchecked(gamma, y);
            }
        }
    }

    pub fn prox(&self, gamma: f64, z: &[f64]) -> Result<Vec<f64>> {
        let mut out = z.to_vec();
        self.apply_in_place(gamma, &mut out)?;
        Ok(out)
    }

    /// `g(z)`, `+∞` outside the domain of an indicator.
    pub fn value(&self, z: &[f64]) -> f64 {
        match self {
            ProxKind::Zero => 0.0,
            ProxKind::SqDistance { lambda, anchor } => 0.5 * lambda * linalg::sq_dist(z, anchor),
            ProxKind::BallIndicator { radius, block_len } => {
                let tol = radius * (1.0 + 1e-12) + 1e-15;
                let inside = z.chunks(*block_len).all(|v| linalg::norm(v) <= tol);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxKind::Product {
                primal_len,
                primal,
                dual,
            } => {
                let (x, y) = z.split_at(*primal_len);
                primal.value(x) + dual.value(y)
            }
        }
    }
}

/// `prox` of `g ≡ 0`: the identity.
pub fn prox_zero(_gamma: f64, z: &[f64]) -> Vec<f64> {
    z.to_vec()
}

/// Closed-form prox of `λ/2 ‖y − anchor‖²`: `(z + γλ·anchor) / (1 + γλ)`.
pub fn prox_sq_distance(gamma: f64, lambda: f64, anchor: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    check_dim(z.len(), anchor.len())?;
    ProxKind::SqDistance {
        lambda,
        anchor: anchor.to_vec(),
    }
    .prox(gamma, z)
}

/// Projects every `block_len` chunk of `z` onto the ball of the given radius.
/// Zero chunks are left where they are.
pub fn project_balls(radius: f64, block_len: usize, z: &[f64]) -> Result<Vec<f64>> {
    let kind = ProxKind::BallIndicator { radius, block_len };
    kind.validate(z.len())?;
    let mut out = z.to_vec();
    project_chunks(radius, block_len, &mut out);
    Ok(out)
}

/// Block-separable prox: `primal` on the first `primal_len` coordinates, `dual` on the rest.
pub fn prox_product(
    gamma: f64,
    primal_len: usize,
    primal: &ProxKind,
    dual: &ProxKind,
    z: &[f64],
) -> Result<Vec<f64>> {
    ProxKind::product(primal_len, primal.clone(), dual.clone()).prox(gamma, z)
}

fn project_chunks(radius: f64, block_len: usize, z: &mut [f64]) {
    for v in z.chunks_mut(block_len) {
        let nrm = linalg::norm(v);
        // a chunk already scaled onto the sphere may sit a few ulps outside
        if nrm > radius * (1.0 + 4.0 * f64::EPSILON) && nrm > 0.0 {
            let s = radius / nrm;
            v.iter_mut().for_each(|x| *x *= s);
        }
    }
}
