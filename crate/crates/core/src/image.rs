//! Single-channel images, additive noise and square-block partitions.

use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};
use crate::rng::{stream, SeededRng};

/// Row-major grayscale image; pixel `(i, j)` lives at `i * width + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("image", "height and width must be positive"));
        }
        check_dim(height * width, pixels.len())?;
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let pixels = (0..height * width)
            .map(|k| f(k / width.max(1), k % width.max(1)))
            .collect();
        Self::new(height, width, pixels)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.width + j]
    }

    /// Adds i.i.d. `N(0, σ²)` noise drawn from `seed`. Values are not clamped.
    pub fn add_gaussian_noise(&self, sigma: f64, seed: u64) -> Result<GrayImage> {
        if !(sigma >= 0.0) {
            return Err(invalid("sigma", "noise level must be non-negative"));
        }
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = SeededRng::new(seed, stream::NOISE);
        let pixels = self
            .pixels
            .iter()
            .map(|p| p + sigma * rng.normal())
            .collect();
        Ok(GrayImage {
            height: self.height,
            width: self.width,
            pixels,
        })
    }

    /// Mean squared difference.
    pub fn mse(&self, other: &GrayImage) -> Result<f64> {
        if (self.height, self.width) != (other.height, other.width) {
            return Err(Error::DimensionMismatch {
                expected: self.pixels.len(),
                got: other.pixels.len(),
            });
        }
        let sum: f64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok(sum / self.pixels.len() as f64)
    }

    /// Peak signal-to-noise ratio in dB for peak value 1.
    pub fn psnr(&self, other: &GrayImage) -> Result<f64> {
        let mse = self.mse(other)?;
        Ok(-10.0 * libm::log10(mse))
    }
}

/// Pixel indices of the `b×b` blocks of an `H×W` grid, blocks in row-major order
/// and pixels row-major within each block.
pub fn partition_grid(height: usize, width: usize, block: usize) -> Result<Vec<Vec<usize>>> {
    if block == 0 || height == 0 || width == 0 || !height.is_multiple_of(block) || !width.is_multiple_of(block) {
        return Err(Error::IndivisibleGrid {
            height,
            width,
            block,
        });
    }
    let (rows, cols) = (height / block, width / block);
    let mut out = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let mut blk = Vec::with_capacity(block * block);
            for i in br * block..(br + 1) * block {
                for j in bc * block..(bc + 1) * block {
                    blk.push(i * width + j);
                }
            }
            out.push(blk);
        }
    }
    Ok(out)
}

/// Piecewise-constant test picture: a dark background with a bright rectangle,
/// a mid-gray disc and a darker diagonal band.
pub fn synthetic_shapes(height: usize, width: usize) -> Result<GrayImage> {
    let (h, w) = (height as f64, width as f64);
    GrayImage::from_fn(height, width, |i, j| {
        let (y, x) = ((i as f64 + 0.5) / h, (j as f64 + 0.5) / w);
        let (dy, dx) = (y - 0.65, x - 0.62);
        if (0.12..0.45).contains(&y) && (0.1..0.5).contains(&x) {
            0.85
        } else if dy * dy + dx * dx < 0.05 {
            0.55
        } else if (x - y).abs() < 0.06 {
            0.35
        } else {
            0.15
        }
    })
}
