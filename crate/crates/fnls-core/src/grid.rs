use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{FnlsError, Result};

/// Sampling of the truncated waveguide [−lx, lx)^d × [0, 2π)^m.
///
/// The x-box is periodized; ground states decay in x, so the
/// periodization error is controlled by `lx`. The torus period is 2π.
/// Samples sit at −lx + j·(2lx/nx) and j·(2π/ny); the frequency
/// lattices are ξ ∈ (π/lx)·{−nx/2,…,nx/2−1} and integer
/// k ∈ {−ny/2,…,ny/2−1}. Arrays are row-major with the x axes first.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub m: usize,
    pub lx: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(d: usize, m: usize, lx: f64, nx: usize, ny: usize) -> Result<Arc<Grid>> {
        if d == 0 || d > 4 || m > 2 {
            return Err(FnlsError::InvalidParams(format!(
                "grid dimensions d={d}, m={m} unsupported"
            )));
        }
        if !(lx > 0.0) {
            return Err(FnlsError::InvalidParams(format!("lx={lx} must be > 0")));
        }
        if nx < 2 || nx % 2 != 0 {
            return Err(FnlsError::InvalidParams(format!("nx={nx} must be even and ≥ 2")));
        }
        if m > 0 && (ny < 2 || ny % 2 != 0) {
            return Err(FnlsError::InvalidParams(format!("ny={ny} must be even and ≥ 2")));
        }
        Ok(Arc::new(Grid { d, m, lx, nx, ny: if m == 0 { 1 } else { ny } }))
    }

    /// Axis lengths in row-major order: d copies of nx, then m copies of ny.
    pub fn dims(&self) -> Vec<usize> {
        let mut v = vec![self.nx; self.d];
        v.extend(std::iter::repeat(self.ny).take(self.m));
        v
    }

    pub fn num_points(&self) -> usize {
        self.nx.pow(self.d as u32) * self.ny.pow(self.m as u32)
    }

    /// Quadrature weight (2lx/nx)^d · (2π/ny)^m of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.hx().powi(self.d as i32) * self.hy().powi(self.m as i32)
    }

    /// Volume (2lx)^d · (2π)^m of the computational domain.
    pub fn domain_volume(&self) -> f64 {
        (2.0 * self.lx).powi(self.d as i32) * (2.0 * PI).powi(self.m as i32)
    }

    pub fn hx(&self) -> f64 {
        2.0 * self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        2.0 * PI / self.ny as f64
    }

    /// x sample coordinate on one axis.
    pub fn x_coord(&self, j: usize) -> f64 {
        -self.lx + j as f64 * self.hx()
    }

    /// y sample coordinate on one torus axis.
    pub fn y_coord(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    /// Signed frequency index in FFT storage order.
    pub fn fft_signed(j: usize, n: usize) -> i64 {
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    fn signed_index(j: usize, n: usize) -> i64 {
        Self::fft_signed(j, n)
    }

    /// x frequency ξ for the FFT-ordered index `j` on one axis.
    pub fn xi(&self, j: usize) -> f64 {
        PI / self.lx * Self::signed_index(j, self.nx) as f64
    }

    /// Torus frequency k (an integer) for the FFT-ordered index `j`.
    pub fn k(&self, j: usize) -> f64 {
        Self::signed_index(j, self.ny) as f64
    }

    /// Per-axis squared frequencies, x axes then y axes, FFT order.
    pub fn axis_freq_sq(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.d + self.m);
        for _ in 0..self.d {
            out.push((0..self.nx).map(|j| self.xi(j) * self.xi(j)).collect());
        }
        for _ in 0..self.m {
            out.push((0..self.ny).map(|j| self.k(j) * self.k(j)).collect());
        }
        out
    }

    /// Visit every lattice point as (flat index, |ξ|², |k|²).
    pub fn for_each_freq(&self, mut f: impl FnMut(usize, f64, f64)) {
        let dims = self.dims();
        let tables = self.axis_freq_sq();
        let mut idx = vec![0usize; dims.len()];
        let total = self.num_points();
        for flat in 0..total {
            let mut xi2 = 0.0;
            let mut k2 = 0.0;
            for (a, &i) in idx.iter().enumerate() {
                if a < self.d {
                    xi2 += tables[a][i];
                } else {
                    k2 += tables[a][i];
                }
            }
            f(flat, xi2, k2);
            // row-major odometer, last axis fastest
            for a in (0..dims.len()).rev() {
                idx[a] += 1;
                if idx[a] < dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }

    /// Visit every physical sample as (flat index, x coords, y coords).
    pub fn for_each_point(&self, mut f: impl FnMut(usize, &[f64], &[f64])) {
        let dims = self.dims();
        let mut idx = vec![0usize; dims.len()];
        let mut x = vec![0.0; self.d];
        let mut y = vec![0.0; self.m];
        let total = self.num_points();
        for flat in 0..total {
            for a in 0..self.d {
                x[a] = self.x_coord(idx[a]);
            }
            for a in 0..self.m {
                y[a] = self.y_coord(idx[self.d + a]);
            }
            f(flat, &x, &y);
            for a in (0..dims.len()).rev() {
                idx[a] += 1;
                if idx[a] < dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
    }
}
