//! Total-variation denoising as a saddle problem over `z = (u, p)`.
//!
//! The objective is `−⟨u, div p⟩ + λ/2 ‖u − g‖² − δ(|p| ≤ 1)`, minimised over
//! the image `u` and maximised over the per-pixel dual vectors `p`, giving
//! `F(u, p) = (−div p + λ(u − g), −∇u)`. The image is cut into `b×b` blocks, one
//! component per block; block `i` only sees its own pixels, with the gradient
//! boundary rule applied at the block edge, and its output is scaled by the
//! number of blocks.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::image::GrayImage;
use crate::problem::{ComponentFamily, Constant, Constants, FiniteSumVI};
use crate::prox::ProxKind;

use super::grid::{div_at, GridShape, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct DenoisingSpec {
    pub noisy: GrayImage,
    pub lambda: f64,
    pub block: usize,
    pub h: f64,
}

impl DenoisingSpec {
    /// `λ = 8`, `b = 8`, `h = 1`.
    pub fn new(noisy: GrayImage) -> Self {
        Self {
            noisy,
            lambda: 8.0,
            block: 8,
            h: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenoisingFamily {
    shape: GridShape,
    block: usize,
    lambda: f64,
    inv_h: f64,
    noisy: Vec<f64>,
    windows: Vec<Window>,
}

impl DenoisingFamily {
    pub fn new(spec: &DenoisingSpec) -> Result<Self> {
        let (h, w, b) = (spec.noisy.height(), spec.noisy.width(), spec.block);
        if b == 0 || h % b != 0 || w % b != 0 {
            return Err(Error::IndivisibleGrid {
                height: h,
                width: w,
                block: b,
            });
        }
        let shape = GridShape::new(h, w)?;
        if !(spec.lambda > 0.0) {
            return Err(invalid("lambda", "must be positive"));
        }
        if !(spec.h > 0.0) {
            return Err(invalid("h", "grid step must be positive"));
        }
        let mut windows = Vec::new();
        for br in 0..h / b {
            for bc in 0..w / b {
                windows.push(Window {
                    row0: br * b,
                    row1: (br + 1) * b,
                    col0: bc * b,
                    col1: (bc + 1) * b,
                });
            }
        }
        Ok(Self {
            shape,
            block: b,
            lambda: spec.lambda,
            inv_h: 1.0 / spec.h,
            noisy: spec.noisy.pixels().to_vec(),
            windows,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn pixels(&self) -> usize {
        self.shape.pixels()
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// Combines `scale · F` restricted to `win` into `out` with `combine(slot, value)`.
    fn apply_window(
        &self,
        win: &Window,
        scale: f64,
        z: &[f64],
        out: &mut [f64],
        combine: impl Fn(&mut f64, f64),
    ) {
        let hw = self.pixels();
        let width = self.shape.width;
        let ih = self.inv_h;
        let (u, p) = z.split_at(hw);
        let (out_u, out_p) = out.split_at_mut(hw);
        let bw = win.col1 - win.col0;
        for i in win.row0..win.row1 {
            let s = i * width + win.col0;
            let has_next = i + 1 < win.row1;
            let has_prev = i > win.row0;
            let ur = &u[s..s + bw];
            let un = if has_next {
                &u[s + width..s + width + bw]
            } else {
                ur
            };
            let gr = &self.noisy[s..s + bw];
            let pr = &p[2 * s..2 * (s + bw)];
            let pu = if has_prev {
                &p[2 * (s - width)..2 * (s - width + bw)]
            } else {
                pr
            };
            let our = &mut out_u[s..s + bw];
            let opr = &mut out_p[2 * s..2 * (s + bw)];
            for jj in 0..bw {
                let pv = if has_next { pr[2 * jj] } else { 0.0 };
                let pv_up = if has_prev { pu[2 * jj] } else { 0.0 };
                let ph = if jj + 1 < bw { pr[2 * jj + 1] } else { 0.0 };
                let ph_left = if jj > 0 { pr[2 * jj - 1] } else { 0.0 };
                let div = (pv - pv_up + ph - ph_left) * ih;
                combine(
                    &mut our[jj],
                    scale * (-div + self.lambda * (ur[jj] - gr[jj])),
                );
                let gv = if has_next {
                    (un[jj] - ur[jj]) * ih
                } else {
                    0.0
                };
                let gh = if jj + 1 < bw {
                    (ur[jj + 1] - ur[jj]) * ih
                } else {
                    0.0
                };
                combine(&mut opr[2 * jj], scale * -gv);
                combine(&mut opr[2 * jj + 1], scale * -gh);
            }
        }
    }

    /// The unbatched operator with gradient and divergence on the whole grid.
    pub fn monolithic_operator(&self, z: &[f64]) -> Result<Vec<f64>> {
        crate::error::check_dim(3 * self.pixels(), z.len())?;
        let mut out = vec![0.0; z.len()];
        self.apply_window(&self.shape.full_window(), 1.0, z, &mut out, |o, v| *o = v);
        Ok(out)
    }

    fn objective_on(&self, windows: &[Window], z: &[f64]) -> f64 {
        let hw = self.pixels();
        let width = self.shape.width;
        let (u, p) = z.split_at(hw);
        let mut coupling = 0.0;
        for win in windows {
            for i in win.row0..win.row1 {
                for j in win.col0..win.col1 {
                    let k = i * width + j;
                    coupling += u[k] * div_at(p, width, win, self.inv_h, i, j);
                }
            }
        }
        let fit: f64 = u
            .iter()
            .zip(&self.noisy)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        -coupling + 0.5 * self.lambda * fit
    }

    /// Smooth part `−⟨u, div p⟩ + λ/2‖u − g‖²` with the block-local divergence.
    pub fn objective(&self, z: &[f64]) -> Result<f64> {
        crate::error::check_dim(3 * self.pixels(), z.len())?;
        Ok(self.objective_on(&self.windows, z))
    }

    /// Smooth part with the divergence on the whole grid.
    pub fn monolithic_objective(&self, z: &[f64]) -> Result<f64> {
        crate::error::check_dim(3 * self.pixels(), z.len())?;
        Ok(self.objective_on(&[self.shape.full_window()], z))
    }

    /// Pixels that lie strictly inside a block (not on any block edge).
    pub fn is_block_interior(&self, i: usize, j: usize) -> bool {
        let b = self.block;
        let (ri, rj) = (i % b, j % b);
        ri != 0 && ri != b - 1 && rj != 0 && rj != b - 1
    }
}

impl ComponentFamily for DenoisingFamily {
    fn dim(&self) -> usize {
        3 * self.pixels()
    }

    fn len(&self) -> usize {
        self.windows.len()
    }

    fn eval_into(&self, i: usize, z: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let n = self.windows.len() as f64;
        self.apply_window(&self.windows[i], n, z, out, |o, v| *o = v);
    }

    fn accumulate_into(&self, i: usize, z: &[f64], acc: &mut [f64], _scratch: &mut [f64]) {
        let n = self.windows.len() as f64;
        self.apply_window(&self.windows[i], n, z, acc, |o, v| *o += v);
    }
}

/// Builds the batched denoising problem with `g = (0, unit balls on each pixel's p)`.
///
/// Stored constants: `μ = 0` and the component bound `L = n(λ + √8/h)`.
pub fn make_denoising(spec: &DenoisingSpec) -> Result<FiniteSumVI> {
    let fam = DenoisingFamily::new(spec)?;
    let hw = fam.pixels();
    let n = fam.len() as f64;
    let l = n * (spec.lambda + libm::sqrt(8.0) / spec.h);
    let constants = Constants {
        lipschitz: Some(Constant::analytic(l)),
        strong_monotonicity: Some(Constant::analytic(0.0)),
        sigma_star_sq: None,
    };
    let reg = ProxKind::product(
        hw,
        ProxKind::Zero,
        ProxKind::BallIndicator {
            radius: 1.0,
            block_len: 2,
        },
    );
    FiniteSumVI::new(Arc::new(fam), reg)?
        .with_constants(constants)?
        .with_blocks(hw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::synthetic_shapes;
    use crate::problems::grid::{div_field, grad_image};
    use crate::rng::SeededRng;

    fn random_z(d: usize, seed: u64) -> Vec<f64> {
        let mut rng = SeededRng::new(seed, 0);
        (0..d).map(|_| rng.normal()).collect()
    }

    fn spec(h: usize, w: usize, b: usize) -> DenoisingSpec {
        let img = synthetic_shapes(h, w)
            .unwrap()
            .add_gaussian_noise(0.05, 1)
            .unwrap();
        DenoisingSpec {
            block: b,
            ..DenoisingSpec::new(img)
        }
    }

    #[test]
    fn stationary_data_term() {
        let s = spec(8, 8, 4);
        let p = make_denoising(&s).unwrap();
        let mut z = s.noisy.pixels().to_vec();
        z.extend(vec![0.0; 128]);
        let f = p.evaluate_full(&z).unwrap();
        assert!(f[..64].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn monolithic_matches_dense_formula() {
        let s = spec(8, 8, 8);
        let fam = DenoisingFamily::new(&s).unwrap();
        let z = random_z(192, 5);
        let shape = GridShape::new(8, 8).unwrap();
        let div = div_field(&z[64..], shape, 1.0).unwrap();
        let grad = grad_image(&z[..64], shape, 1.0).unwrap();
        let f = fam.monolithic_operator(&z).unwrap();
        for k in 0..64 {
            let expect = -div[k] + 8.0 * (z[k] - s.noisy.pixels()[k]);
            assert!((f[k] - expect).abs() < 1e-12);
        }
        for k in 0..128 {
            assert!((f[64 + k] + grad[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_equals_monolithic_on_block_interiors() {
        let s = spec(16, 16, 4);
        let p = make_denoising(&s).unwrap();
        let fam = DenoisingFamily::new(&s).unwrap();
        let z = random_z(3 * 256, 9);
        let batched = p.evaluate_full(&z).unwrap();
        let mono = fam.monolithic_operator(&z).unwrap();
        let mut boundary_gap = 0.0f64;
        for i in 0..16 {
            for j in 0..16 {
                let k = i * 16 + j;
                let idx = [k, 256 + 2 * k, 256 + 2 * k + 1];
                let gap = idx
                    .iter()
                    .map(|&c| (batched[c] - mono[c]).abs())
                    .fold(0.0, f64::max);
                if fam.is_block_interior(i, j) {
                    assert!(gap <= 1e-12, "({i},{j}) {gap}");
                } else {
                    boundary_gap = boundary_gap.max(gap);
                }
            }
        }
        assert!(boundary_gap > 0.0);
    }

    #[test]
    fn single_block_equals_monolithic_everywhere() {
        let s = spec(8, 8, 8);
        let p = make_denoising(&s).unwrap();
        let fam = DenoisingFamily::new(&s).unwrap();
        let z = random_z(192, 2);
        assert_eq!(
            &*p.evaluate_full(&z).unwrap(),
            fam.monolithic_operator(&z).unwrap().as_slice()
        );
    }

    #[test]
    fn operator_matches_objective_differences() {
        let s = DenoisingSpec {
            h: 0.7,
            lambda: 3.0,
            ..spec(8, 8, 4)
        };
        let p = make_denoising(&s).unwrap();
        let fam = DenoisingFamily::new(&s).unwrap();
        let mut z = random_z(192, 3);
        let f = p.evaluate_full(&z).unwrap();
        let eps = 1e-5;
        for c in 0..192 {
            let orig = z[c];
            z[c] = orig + eps;
            let up = fam.objective(&z).unwrap();
            z[c] = orig - eps;
            let down = fam.objective(&z).unwrap();
            z[c] = orig;
            let mut fd = (up - down) / (2.0 * eps);
            if c >= 64 {
                fd = -fd;
            }
            assert!(
                (fd - f[c]).abs() <= 1e-6 * f[c].abs().max(1.0),
                "{c}: {fd} vs {}",
                f[c]
            );
        }
    }

    #[test]
    fn component_bound_holds_on_samples() {
        let p = make_denoising(&spec(8, 8, 4)).unwrap();
        let s = p.sample_constants(200, 1, None, 1.0).unwrap();
        assert!(s.lipschitz <= p.constants().l().unwrap());
        assert!(s.monotonicity >= -1e-12);
    }

    #[test]
    fn accumulate_matches_default() {
        let p = make_denoising(&spec(8, 8, 4)).unwrap();
        let fam = p.family();
        let z = random_z(192, 4);
        let mut a = vec![0.0; 192];
        let mut b = vec![0.0; 192];
        let mut scratch = vec![0.0; 192];
        for i in 0..fam.len() {
            fam.accumulate_into(i, &z, &mut a, &mut scratch);
            fam.eval_into(i, &z, &mut scratch);
            b.iter_mut().zip(&scratch).for_each(|(x, y)| *x += y);
        }
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            make_denoising(&spec(8, 12, 8)),
            Err(Error::IndivisibleGrid { .. })
        ));
        assert!(make_denoising(&DenoisingSpec {
            lambda: 0.0,
            ..spec(8, 8, 4)
        })
        .is_err());
    }
}
