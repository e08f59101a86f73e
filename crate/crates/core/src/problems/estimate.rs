use alloc::vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::FiniteSumVI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedConstants {
    pub lipschitz: f64,
    pub strong_monotonicity: f64,
    pub sigma_star_sq: f64,
}

/// Sampled `L̂`, `μ̂` on the unit box around the stored solution, and
/// `σ̂*² = max(mean_i ‖F_i(z*)‖², ‖F(z*)‖²)`.
pub fn estimate_constants(
    problem: &FiniteSumVI,
    samples: usize,
    seed: u64,
) -> Result<EstimatedConstants> {
    let z_star = &problem.reference().ok_or(Error::MissingReference)?.point;
    let sampled = problem.sample_constants(samples, seed, Some(z_star), 1.0)?;
    let d = problem.dim();
    let n = problem.len();
    let (mut out, mut full) = (vec![0.0; d], vec![0.0; d]);
    let mut mean_sq = 0.0;
    for i in 0..n {
        problem.family().eval_into(i, z_star, &mut out);
        mean_sq += linalg::sq_norm(&out);
        full.iter_mut().zip(&out).for_each(|(f, o)| *f += o);
    }
    mean_sq /= n as f64;
    full.iter_mut().for_each(|f| *f /= n as f64);
    Ok(EstimatedConstants {
        lipschitz: sampled.lipschitz,
        strong_monotonicity: sampled.monotonicity,
        sigma_star_sq: mean_sq.max(linalg::sq_norm(&full)),
    })
}
