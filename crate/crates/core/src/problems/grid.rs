//! Forward-difference gradient and its negative adjoint on a pixel grid.
//!
//! Images are row-major `H×W`. A gradient field stores two values per pixel,
//! interleaved: index `2(iW + j)` holds the vertical difference
//! `(u[i+1, j] − u[i, j]) / h` and `2(iW + j) + 1` the horizontal one
//! `(u[i, j+1] − u[i, j]) / h`. Differences that would leave the grid are zero
//! (the outside neighbour repeats the edge pixel).
//!
//! The same stencils work on any rectangular window of the grid, with the
//! window edge treated as the grid edge; the batched denoising operator relies
//! on that.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
}

impl GridShape {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::DegenerateGrid { height, width });
        }
        Ok(Self { height, width })
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn full_window(&self) -> Window {
        Window {
            row0: 0,
            row1: self.height,
            col0: 0,
            col1: self.width,
        }
    }
}

/// Half-open pixel rectangle `[row0, row1) × [col0, col1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row0: usize,
    pub row1: usize,
    pub col0: usize,
    pub col1: usize,
}

impl Window {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        i >= self.row0 && i < self.row1 && j >= self.col0 && j < self.col1
    }
}

/// Gradient of `u` at pixel `(i, j)` with the boundary at the window edge.
#[inline]
pub(crate) fn grad_at(
    u: &[f64],
    width: usize,
    win: &Window,
    inv_h: f64,
    i: usize,
    j: usize,
) -> (f64, f64) {
    let k = i * width + j;
    let gv = if i + 1 < win.row1 {
        (u[k + width] - u[k]) * inv_h
    } else {
        0.0
    };
    let gh = if j + 1 < win.col1 {
        (u[k + 1] - u[k]) * inv_h
    } else {
        0.0
    };
    (gv, gh)
}

/// Divergence of the interleaved field `p` at `(i, j)`, the negative adjoint of
/// [`grad_at`] on the same window.
#[inline]
pub(crate) fn div_at(p: &[f64], width: usize, win: &Window, inv_h: f64, i: usize, j: usize) -> f64 {
    let k = i * width + j;
    let mut acc = 0.0;
    if i + 1 < win.row1 {
        acc += p[2 * k];
    }
    if i > win.row0 {
        acc -= p[2 * (k - width)];
    }
    if j + 1 < win.col1 {
        acc += p[2 * k + 1];
    }
    if j > win.col0 {
        acc -= p[2 * (k - 1) + 1];
    }
    acc * inv_h
}

fn check_h(h: f64) -> Result<f64> {
    if h > 0.0 {
        Ok(1.0 / h)
    } else {
        Err(invalid("h", "grid step must be positive"))
    }
}

/// Forward-difference gradient of an `H×W` image; returns an interleaved `H×W×2` field.
pub fn grad_image(u: &[f64], shape: GridShape, h: f64) -> Result<Vec<f64>> {
    let shape = GridShape::new(shape.height, shape.width)?;
    check_dim(shape.pixels(), u.len())?;
    let inv_h = check_h(h)?;
    let win = shape.full_window();
    let mut out = vec![0.0; 2 * shape.pixels()];
    for i in 0..shape.height {
        for j in 0..shape.width {
            let (gv, gh) = grad_at(u, shape.width, &win, inv_h, i, j);
            let k = i * shape.width + j;
            out[2 * k] = gv;
            out[2 * k + 1] = gh;
        }
    }
    Ok(out)
}

/// Divergence satisfying `⟨grad_image(u), p⟩ = −⟨u, div_field(p)⟩` for all `u`.
pub fn div_field(p: &[f64], shape: GridShape, h: f64) -> Result<Vec<f64>> {
    let shape = GridShape::new(shape.height, shape.width)?;
    check_dim(2 * shape.pixels(), p.len())?;
    let inv_h = check_h(h)?;
    let win = shape.full_window();
    let mut out = vec![0.0; shape.pixels()];
    for i in 0..shape.height {
        for j in 0..shape.width {
            out[i * shape.width + j] = div_at(p, shape.width, &win, inv_h, i, j);
        }
    }
    Ok(out)
}
