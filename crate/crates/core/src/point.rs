use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

use crate::error::{check_dim, invalid, Result};
use crate::linalg;

/// A dense point `z`, optionally split into a primal block of length `primal`
/// followed by a dual block.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: Vec<f64>,
    primal: Option<usize>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("coords", "a point needs at least one coordinate"));
        }
        Ok(Self {
            coords,
            primal: None,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![0.0; dim.max(1)],
            primal: None,
        }
    }

    /// Attaches a primal/dual split; `primal` coordinates go to the first block.
    pub fn with_blocks(mut self, primal: usize) -> Result<Self> {
        if primal > self.coords.len() {
            return Err(invalid("primal", "primal block longer than the point"));
        }
        self.primal = Some(primal);
        Ok(self)
    }

    pub(crate) fn from_parts(coords: Vec<f64>, primal: Option<usize>) -> Self {
        Self { coords, primal }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn primal_len(&self) -> Option<usize> {
        self.primal
    }

    pub fn primal(&self) -> &[f64] {
        &self.coords[..self.primal.unwrap_or(self.coords.len())]
    }

    pub fn dual(&self) -> &[f64] {
        &self.coords[self.primal.unwrap_or(self.coords.len())..]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.coords)
    }
}

impl Deref for Point {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.coords
    }
}

impl DerefMut for Point {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }
}

/// `‖a − b‖²` in the Euclidean norm.
pub fn sq_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(linalg::sq_dist(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        assert_eq!(sq_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(sq_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(
            sq_distance(&[0.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn blocks_split_coordinates() {
        let p = Point::new(vec![5.0, 3.0, 4.0])
            .unwrap()
            .with_blocks(1)
            .unwrap();
        assert_eq!(p.primal(), &[5.0]);
        assert_eq!(p.dual(), &[3.0, 4.0]);
        assert!(Point::new(vec![]).is_err());
        assert!(Point::zeros(2).with_blocks(3).is_err());
    }

    proptest! {
        #[test]
        fn distance_is_symmetric(a in prop::collection::vec(-1e3..1e3f64, 5), b in prop::collection::vec(-1e3..1e3f64, 5)) {
            prop_assert_eq!(sq_distance(&a, &b).unwrap(), sq_distance(&b, &a).unwrap());
        }
    }
}
