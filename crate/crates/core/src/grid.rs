//! Uniform grids and grid functions shared by the semigroup, potential and
//! oracle computations.
//!
//! Convention: node count is a power of two (FFT friendliness), default extent
//! `[-64, 64)` with 2^13 nodes. All convolution-style operations treat a grid
//! function as negligible outside the grid and report an aliasing error when
//! that assumption visibly fails.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

pub const DEFAULT_EXTENT: f64 = 64.0;
pub const DEFAULT_NODES: usize = 1 << 13;
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Uniform grid `x_i = x0 + i*dx`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x0: f64,
    dx: f64,
    n: usize,
}

impl Grid {
    pub fn new(x0: f64, dx: f64, n: usize) -> Self {
        assert!(n.is_power_of_two(), "node count must be a power of two");
        assert!(dx > 0.0);
        Self { x0, dx, n }
    }

    /// Symmetric grid on `[-extent, extent)` with `n` nodes.
    pub fn symmetric(extent: f64, n: usize) -> Self {
        assert!(extent > 0.0);
        Self::new(-extent, 2.0 * extent / n as f64, n)
    }

    pub fn default_grid() -> Self {
        Self::symmetric(DEFAULT_EXTENT, DEFAULT_NODES)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn x_end(&self) -> f64 {
        self.x(self.n - 1)
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let i = ((x - self.x0) / self.dx).round();
        i.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Angular frequency of FFT bin `k`.
    pub fn omega(&self, k: usize) -> f64 {
        let k_signed = if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        };
        2.0 * std::f64::consts::PI * k_signed / (self.n as f64 * self.dx)
    }
}

/// Real-valued function sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct GridFn {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFn {
    pub fn sample<F: FnMut(f64) -> f64>(grid: Grid, mut f: F) -> Self {
        let values = grid.xs().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.n()] }
    }

    /// Trapezoid integral over the grid's periodic cell `[x0, x0 + n dx)`,
    /// i.e. `dx * sum(values)`. Spectral multipliers preserve this integral to
    /// machine precision (the zero-frequency bin is untouched).
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.dx()
    }

    /// Linear interpolation, zero outside the grid.
    pub fn interp(&self, x: f64) -> f64 {
        let u = (x - self.grid.x0()) / self.grid.dx();
        if u < 0.0 || u > (self.grid.n() - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).min(self.grid.n() - 2);
        let t = u - i as f64;
        (1.0 - t) * self.values[i] + t * self.values[i + 1]
    }

    /// Four-point Lagrange interpolation; exact at nodes, O(h^4) between them.
    pub fn interp_cubic(&self, x: f64) -> f64 {
        let n = self.grid.n();
        let u = (x - self.grid.x0()) / self.grid.dx();
        if u < 0.0 || u > (n - 1) as f64 {
            return 0.0;
        }
        let i = (u.floor() as usize).clamp(1, n - 3);
        let t = u - i as f64;
        let (ym, y0, y1, y2) =
            (self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]);
        let c_m = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c_0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c_1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c_2 = (t + 1.0) * t * (t - 1.0) / 6.0;
        c_m * ym + c_0 * y0 + c_1 * y1 + c_2 * y2
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest boundary magnitude relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        self.values[0].abs().max(self.values[self.grid.n() - 1].abs()) / peak
    }

    pub fn check_aliasing(&self, tol: f64) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio > tol {
            Err(Error::Aliasing { boundary: ratio, tol })
        } else {
            Ok(())
        }
    }
}

thread_local! {
    static FFT_CACHE: RefCell<HashMap<(usize, bool), Arc<dyn Fft<f64>>>> =
        RefCell::new(HashMap::new());
}

fn planned_fft(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    FFT_CACHE.with(|c| {
        c.borrow_mut()
            .entry((n, inverse))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// Apply a real, even Fourier multiplier `m(omega)` to a grid function.
///
/// This is the discrete counterpart of `f -> F^{-1}[m(omega) F f]` assuming the
/// periodic extension of `f` is harmless (mass outside the grid negligible).
pub fn apply_fourier_multiplier<M: Fn(f64) -> f64>(f: &GridFn, multiplier: M) -> GridFn {
    let n = f.grid.n();
    let mut buf: Vec<Complex<f64>> =
        f.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planned_fft(n, false).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        *c *= multiplier(f.grid.omega(k));
    }
    planned_fft(n, true).process(&mut buf);
    let scale = 1.0 / n as f64;
    GridFn {
        grid: f.grid,
        values: buf.into_iter().map(|c| c.re * scale).collect(),
    }
}

/// Forward DFT of the sampled values.
pub fn fft_forward(f: &GridFn) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> =
        f.values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    planned_fft(f.grid.n(), false).process(&mut buf);
    buf
}

/// Inverse DFT back to real samples (imaginary residue discarded).
pub fn fft_inverse(grid: Grid, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
    let n = grid.n();
    assert_eq!(spectrum.len(), n);
    planned_fft(n, true).process(&mut spectrum);
    let scale = 1.0 / n as f64;
    spectrum.into_iter().map(|c| c.re * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn trapezoid_integral_of_gaussian() {
        let g = Grid::symmetric(32.0, 1 << 11);
        let f = GridFn::sample(g, |x| (-x * x / 2.0).exp());
        assert_abs_diff_eq!(f.integral(), (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn identity_multiplier_is_identity() {
        let g = Grid::symmetric(16.0, 1 << 9);
        let f = GridFn::sample(g, |x| (-x * x).exp() * (1.0 + x));
        let out = apply_fourier_multiplier(&f, |_| 1.0);
        for (a, b) in f.values.iter().zip(&out.values) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn frequencies_are_symmetric() {
        let g = Grid::symmetric(8.0, 8);
        assert_abs_diff_eq!(g.omega(1), -g.omega(7), epsilon = 1e-15);
        assert!(g.omega(0) == 0.0);
    }
}
