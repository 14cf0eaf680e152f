use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{FnlsError, Result};
use crate::grid::Grid;

/// Complex state u(x, y) sampled on a [`Grid`], row-major physical layout.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.num_points() {
            return Err(FnlsError::InvalidParams(format!(
                "field length {} does not match grid ({} points)",
                values.len(),
                grid.num_points()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(FnlsError::InvalidParams("field contains non-finite samples".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Field {
        let n = grid.num_points();
        Field { grid, values: vec![Complex64::new(0.0, 0.0); n] }
    }

    /// Sample a pointwise function of (x, y).
    pub fn from_fn(grid: Arc<Grid>, mut f: impl FnMut(&[f64], &[f64]) -> Complex64) -> Field {
        let mut values = vec![Complex64::new(0.0, 0.0); grid.num_points()];
        grid.for_each_point(|flat, x, y| values[flat] = f(x, y));
        Field { grid, values }
    }

    /// Plane wave e^{i(ξ·x + k·y)} with on-lattice integer mode indices
    /// (x frequencies are ξ_i = (π/lx)·jx_i).
    pub fn plane_wave(grid: Arc<Grid>, jx: &[i64], jk: &[i64], amplitude: f64) -> Field {
        assert_eq!(jx.len(), grid.d);
        assert_eq!(jk.len(), grid.m);
        let lx = grid.lx;
        Field::from_fn(grid, |x, y| {
            let mut phase = 0.0;
            for (a, &j) in jx.iter().enumerate() {
                phase += std::f64::consts::PI / lx * j as f64 * x[a];
            }
            for (a, &j) in jk.iter().enumerate() {
                phase += j as f64 * y[a];
            }
            amplitude * Complex64::new(phase.cos(), phase.sin())
        })
    }

    /// Real Gaussian bump exp(−|x|²/(2 w²)), flat in y.
    pub fn gaussian(grid: Arc<Grid>, width: f64, amplitude: f64) -> Field {
        Field::from_fn(grid, |x, _| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new(amplitude * (-r2 / (2.0 * width * width)).exp(), 0.0)
        })
    }

    /// Gaussian with a cos y modulation on the first torus axis, the
    /// default symmetry-breaking initialization of the solvers.
    pub fn gaussian_y_broken(grid: Arc<Grid>, width: f64, amplitude: f64, eps: f64) -> Field {
        Field::from_fn(grid, |x, y| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            let modulation = if y.is_empty() { 1.0 } else { 1.0 + eps * y[0].cos() };
            Complex64::new(amplitude * (-r2 / (2.0 * width * width)).exp() * modulation, 0.0)
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid == other.grid
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Rotate the global phase so the sample of largest modulus is real
    /// and positive.
    pub fn normalize_phase(&mut self) {
        let mut best = 0usize;
        let mut best_norm = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let n = v.norm_sqr();
            if n > best_norm {
                best_norm = n;
                best = i;
            }
        }
        if best_norm > 0.0 {
            let phase = self.values[best] / self.values[best].norm();
            self.scale(phase.conj());
        }
    }

    /// max |u| over the grid.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_samples() {
        let g = Grid::new(1, 1, 8.0, 4, 2).unwrap();
        let mut vals = vec![Complex64::new(0.0, 0.0); g.num_points()];
        vals[3] = Complex64::new(f64::NAN, 0.0);
        assert!(Field::new(g, vals).is_err());
    }

    #[test]
    fn phase_normalization_makes_peak_real() {
        let g = Grid::new(1, 1, 8.0, 16, 4).unwrap();
        let mut u = Field::gaussian(g, 1.0, 2.0);
        u.scale(Complex64::new(0.3, 0.9));
        u.normalize_phase();
        let peak = u.values().iter().cloned().fold(Complex64::new(0.0, 0.0), |a, b| {
            if b.norm_sqr() > a.norm_sqr() {
                b
            } else {
                a
            }
        });
        assert!(peak.re > 0.0);
        assert!(peak.im.abs() < 1e-12 * peak.re);
    }
}
