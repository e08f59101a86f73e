//! Sparse labelled datasets.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::rng::{stream, SeededRng};

/// Sparse row: `(index, value)` pairs with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub entries: Vec<(usize, f64)>,
}

impl SparseRow {
    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("row", "indices must be strictly increasing"));
        }
        Ok(Self { entries })
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(k, v)| v * dense[k]).sum()
    }

    pub fn sq_norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|e| e.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseDataset {
    rows: Vec<SparseRow>,
    labels: Vec<f64>,
    dim: usize,
}

impl SparseDataset {
    /// `dim` defaults to one past the largest index; a declared larger `dim` wins.
    pub fn new(rows: Vec<SparseRow>, labels: Vec<f64>, dim: Option<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let seen = rows
            .iter()
            .filter_map(SparseRow::max_index)
            .map(|k| k + 1)
            .max()
            .unwrap_or(0);
        if let Some(d) = dim {
            if d < seen {
                return Err(invalid(
                    "dim",
                    "declared dimension smaller than an index in the data",
                ));
            }
        }
        let dim = dim.unwrap_or(seen);
        if dim == 0 {
            return Err(invalid("dim", "dataset has no features"));
        }
        Ok(Self { rows, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Gaussian linear-regression data: `density` of the entries are non-zero
    /// `N(0, 1/(density·d))` draws, `y = ⟨w₀, x⟩ + noise·N(0,1)` for a hidden `w₀ ~ N(0, I)`.
    pub fn synthetic_regression(
        samples: usize,
        dim: usize,
        density: f64,
        noise: f64,
        seed: u64,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::EmptyDataset);
        }
        if dim == 0 || !(density > 0.0 && density <= 1.0) || !(noise >= 0.0) {
            return Err(invalid(
                "synthetic",
                "need dim ≥ 1, density in (0, 1] and noise ≥ 0",
            ));
        }
        let mut rng = SeededRng::new(seed, stream::BUILDER);
        let w0: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let scale = 1.0 / libm::sqrt(density * dim as f64);
        let mut rows = Vec::with_capacity(samples);
        let mut labels = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut entries = Vec::new();
            for k in 0..dim {
                if rng.unit() < density {
                    entries.push((k, scale * rng.normal()));
                }
            }
            let row = SparseRow { entries };
            labels.push(row.dot(&w0) + noise * rng.normal());
            rows.push(row);
        }
        Self::new(rows, labels, Some(dim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validation() {
        assert!(SparseRow::new(vec![(2, 1.0), (2, 1.0)]).is_err());
        let r = SparseRow::new(vec![(0, 1.0), (4, 2.0)]).unwrap();
        assert_eq!(r.dot(&[1.0, 0.0, 0.0, 0.0, 0.5]), 2.0);
        let ds = SparseDataset::new(vec![r.clone()], vec![1.0], None).unwrap();
        assert_eq!(ds.dim(), 5);
        assert_eq!(
            SparseDataset::new(vec![r.clone()], vec![1.0], Some(9))
                .unwrap()
                .dim(),
            9
        );
        assert!(SparseDataset::new(vec![r], vec![1.0], Some(3)).is_err());
        assert_eq!(
            SparseDataset::new(vec![], vec![], None),
            Err(Error::EmptyDataset)
        );
    }

    #[test]
    fn synthetic_is_reproducible() {
        let a = SparseDataset::synthetic_regression(30, 10, 0.3, 0.1, 4).unwrap();
        assert_eq!(
            a,
            SparseDataset::synthetic_regression(30, 10, 0.3, 0.1, 4).unwrap()
        );
        assert_eq!((a.len(), a.dim()), (30, 10));
    }
}
