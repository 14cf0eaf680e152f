use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{FnlsError, Result};
use crate::field::Field;
use crate::grid::Grid;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| match direction {
        FftDirection::Forward => p.borrow_mut().plan_fft_forward(len),
        FftDirection::Inverse => p.borrow_mut().plan_fft_inverse(len),
    })
}

/// Unnormalized 1-D FFT along one axis of a row-major array.
fn fft_axis(values: &mut [Complex64], dims: &[usize], axis: usize, direction: FftDirection) {
    let n = dims[axis];
    let fft = plan(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    if axis == dims.len() - 1 {
        for chunk in values.chunks_exact_mut(n) {
            fft.process_with_scratch(chunk, &mut scratch);
        }
        return;
    }
    let stride: usize = dims[axis + 1..].iter().product();
    let block = n * stride;
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for outer in (0..values.len()).step_by(block) {
        for inner in 0..stride {
            let base = outer + inner;
            for t in 0..n {
                line[t] = values[base + t * stride];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for t in 0..n {
                values[base + t * stride] = line[t];
            }
        }
    }
}

/// Unnormalized n-dimensional FFT over a row-major array.
fn fft_nd(values: &mut [Complex64], dims: &[usize], direction: FftDirection) {
    debug_assert_eq!(values.len(), dims.iter().product::<usize>());
    for axis in 0..dims.len() {
        fft_axis(values, dims, axis, direction);
    }
}

/// Crate-internal access to the unnormalized transform for solver loops
/// that manage their own scaling.
pub(crate) fn fft_nd_raw(values: &mut [Complex64], dims: &[usize], forward: bool) {
    let direction = if forward { FftDirection::Forward } else { FftDirection::Inverse };
    fft_nd(values, dims, direction);
}

/// Forward transform with physical-units normalization: the returned
/// coefficients satisfy Σ|û|² = (cell volume)·Σ|u|² (Parseval).
pub fn forward(u: &Field) -> Vec<Complex64> {
    let grid = u.grid();
    let mut spec = u.values().to_vec();
    fft_nd(&mut spec, &grid.dims(), FftDirection::Forward);
    let scale = grid.cell_volume() / grid.domain_volume().sqrt();
    for v in &mut spec {
        *v *= scale;
    }
    spec
}

/// Inverse of [`forward`].
pub fn inverse(grid: &Arc<Grid>, mut spec: Vec<Complex64>) -> Field {
    fft_nd(&mut spec, &grid.dims(), FftDirection::Inverse);
    let scale = 1.0 / grid.domain_volume().sqrt();
    for v in &mut spec {
        *v *= scale;
    }
    Field::new(grid.clone(), spec).expect("inverse transform produced non-finite values")
}

/// Σ w(|ξ|², |k|²)·|û(ξ,k)|² with Parseval normalization.
pub fn weighted_spectral_sum(u: &Field, w: impl Fn(f64, f64) -> f64) -> f64 {
    let grid = u.grid();
    let mut spec = u.values().to_vec();
    fft_nd(&mut spec, &grid.dims(), FftDirection::Forward);
    let scale = grid.cell_volume() / grid.num_points() as f64;
    let mut acc = 0.0;
    grid.for_each_freq(|flat, xi2, k2| {
        acc += w(xi2, k2) * spec[flat].norm_sqr();
    });
    acc * scale
}

/// Fourier symbols of the operators used throughout: fractional
/// Laplacians, the rescaled operator 𝓛 = −Δ_x − ω^{−1/σ}Δ_y raised to σ,
/// and the x-dilation weight of the Pohozaev functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplierDescriptor {
    /// (|ξ|² + |k|²)^σ
    IsoFrac { sigma: f64 },
    /// |ξ|^{2σ} + |k|^{2σ}
    AnisoFrac { sigma: f64 },
    /// (|ξ|² + ω^{−1/σ}|k|²)^σ
    RescaledL { sigma: f64, omega: f64 },
    /// (|ξ|² + |k|²)^{σ−1}|ξ|², removable zero at the origin
    PohozaevWeight { sigma: f64 },
    /// |ξ|^{2σ}
    PartialX { sigma: f64 },
    /// |k|^{2σ}
    PartialY { sigma: f64 },
}

impl MultiplierDescriptor {
    pub fn sigma(&self) -> f64 {
        match *self {
            Self::IsoFrac { sigma }
            | Self::AnisoFrac { sigma }
            | Self::RescaledL { sigma, .. }
            | Self::PohozaevWeight { sigma }
            | Self::PartialX { sigma }
            | Self::PartialY { sigma } => sigma,
        }
    }

    pub fn value(&self, xi2: f64, k2: f64) -> f64 {
        match *self {
            Self::IsoFrac { sigma } => (xi2 + k2).powf(sigma),
            Self::AnisoFrac { sigma } => xi2.powf(sigma) + k2.powf(sigma),
            Self::RescaledL { sigma, omega } => {
                (xi2 + omega.powf(-1.0 / sigma) * k2).powf(sigma)
            }
            Self::PohozaevWeight { sigma } => {
                if xi2 == 0.0 {
                    0.0
                } else {
                    (xi2 + k2).powf(sigma - 1.0) * xi2
                }
            }
            Self::PartialX { sigma } => xi2.powf(sigma),
            Self::PartialY { sigma } => k2.powf(sigma),
        }
    }

    fn validate(&self) -> Result<()> {
        let sigma = self.sigma();
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(FnlsError::InvalidParams(format!("sigma={sigma} outside (0, 1]")));
        }
        if let Self::RescaledL { omega, .. } = *self {
            if !(omega > 0.0) {
                return Err(FnlsError::InvalidParams(format!("omega={omega} must be > 0")));
            }
        }
        Ok(())
    }
}

/// A nonnegative Fourier multiplier tabulated over the frequency lattice.
#[derive(Debug, Clone)]
pub struct Multiplier {
    grid: Arc<Grid>,
    descriptor: MultiplierDescriptor,
    values: Vec<f64>,
}

impl Multiplier {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn descriptor(&self) -> MultiplierDescriptor {
        self.descriptor
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn build_multiplier(grid: &Arc<Grid>, descriptor: MultiplierDescriptor) -> Result<Multiplier> {
    descriptor.validate()?;
    let mut values = vec![0.0; grid.num_points()];
    grid.for_each_freq(|flat, xi2, k2| {
        values[flat] = descriptor.value(xi2, k2);
    });
    debug_assert!(values.iter().all(|v| *v >= 0.0));
    Ok(Multiplier { grid: grid.clone(), descriptor, values })
}

/// Apply the multiplier as transform → pointwise multiply → inverse
/// transform; self-adjoint and positive semidefinite on the grid.
pub fn apply_multiplier(u: &Field, mult: &Multiplier) -> Result<Field> {
    if u.grid() != &mult.grid {
        return Err(FnlsError::GridMismatch);
    }
    let grid = u.grid().clone();
    let dims = grid.dims();
    let mut spec = u.values().to_vec();
    fft_nd(&mut spec, &dims, FftDirection::Forward);
    for (v, m) in spec.iter_mut().zip(&mult.values) {
        *v *= m;
    }
    fft_nd(&mut spec, &dims, FftDirection::Inverse);
    let scale = 1.0 / grid.num_points() as f64;
    for v in &mut spec {
        *v *= scale;
    }
    Field::new(grid, spec)
}

/// Quadratic form Σ value(ξ,k)·|û(ξ,k)|², nonnegative.
pub fn quadratic_form(u: &Field, mult: &Multiplier) -> Result<f64> {
    if u.grid() != &mult.grid {
        return Err(FnlsError::GridMismatch);
    }
    let grid = u.grid();
    let mut spec = u.values().to_vec();
    fft_nd(&mut spec, &grid.dims(), FftDirection::Forward);
    let scale = grid.cell_volume() / grid.num_points() as f64;
    let mut acc = 0.0;
    for (v, m) in spec.iter().zip(&mult.values) {
        acc += m * v.norm_sqr();
    }
    Ok(acc * scale)
}

/// Spectral x-derivative ∂u/∂x_axis via the iξ multiplier.
pub fn gradient_x_axis(u: &Field, axis: usize) -> Field {
    let grid = u.grid().clone();
    assert!(axis < grid.d);
    let dims = grid.dims();
    let mut spec = u.values().to_vec();
    fft_nd(&mut spec, &dims, FftDirection::Forward);
    let mut idx = vec![0usize; dims.len()];
    for flat in 0..spec.len() {
        let xi = grid.xi(idx[axis]);
        spec[flat] *= Complex64::new(0.0, xi);
        for a in (0..dims.len()).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    fft_nd(&mut spec, &dims, FftDirection::Inverse);
    let scale = 1.0 / grid.num_points() as f64;
    for v in &mut spec {
        *v *= scale;
    }
    Field::new(grid, spec).expect("gradient produced non-finite values")
}

/// 2/3-rule mask over the frequency lattice: true where every axis index
/// satisfies |j| ≤ n/3.
pub fn dealias_mask(grid: &Grid) -> Vec<bool> {
    let dims = grid.dims();
    let cutoffs: Vec<i64> = dims.iter().map(|&n| (n / 3) as i64).collect();
    let mut mask = vec![true; grid.num_points()];
    let mut idx = vec![0usize; dims.len()];
    for flag in mask.iter_mut() {
        for (a, &n) in dims.iter().enumerate() {
            let signed = if idx[a] < n / 2 { idx[a] as i64 } else { idx[a] as i64 - n as i64 };
            if signed.abs() > cutoffs[a] {
                *flag = false;
                break;
            }
        }
        for a in (0..dims.len()).rev() {
            idx[a] += 1;
            if idx[a] < dims[a] {
                break;
            }
            idx[a] = 0;
        }
    }
    mask
}

/// Apply the 2/3-rule spectral truncation to a field.
pub fn dealias(u: &Field, mask: &[bool]) -> Field {
    let grid = u.grid().clone();
    let dims = grid.dims();
    let mut spec = u.values().to_vec();
    fft_nd(&mut spec, &dims, FftDirection::Forward);
    for (v, keep) in spec.iter_mut().zip(mask) {
        if !keep {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    fft_nd(&mut spec, &dims, FftDirection::Inverse);
    let scale = 1.0 / grid.num_points() as f64;
    for v in &mut spec {
        *v *= scale;
    }
    Field::new(grid, spec).expect("dealias produced non-finite values")
}

/// Resample u at the scaled x positions t·x_j by trigonometric
/// interpolation, axis by axis. The torus axes are untouched. For t > 1
/// the spectral content shifts toward the Nyquist frequency; a band-limit
/// guard rejects scalings that would alias appreciable energy.
pub fn resample_x(u: &Field, t: f64) -> Result<Field> {
    let grid = u.grid().clone();
    let dims = grid.dims();
    let mut values = u.values().to_vec();
    for axis in 0..grid.d {
        let n = dims[axis];
        fft_axis(&mut values, &dims, axis, FftDirection::Forward);

        if t > 1.0 {
            let b_eff = effective_bandwidth(&values, &dims, axis);
            let t_max = n as f64 / (2.0 * b_eff.max(1) as f64);
            if t > t_max {
                return Err(FnlsError::BandLimit { t, t_max });
            }
        }

        // evaluation matrix: w_j = (1/n) Σ_f V_f e^{2πi f (t·j + (1−t)n/2)/n},
        // with the Nyquist term taken as a cosine to keep real data real.
        // Scaled positions that leave the box wrap periodically — smooth
        // and accurate in the decaying outer region — but targets that
        // would wrap into the core |x| < lx/2 are zeroed instead, so no
        // interior mass is ever counted twice.
        let mut matrix = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let theta = t * j as f64 + (1.0 - t) * n as f64 / 2.0;
            let wrapped = theta < 0.0 || theta >= n as f64;
            if wrapped {
                let folded = theta.rem_euclid(n as f64);
                if (folded - n as f64 / 2.0).abs() < n as f64 / 4.0 {
                    continue;
                }
            }
            for fi in 0..n {
                let f = Grid::fft_signed(fi, n);
                let phase = 2.0 * PI * f as f64 * theta / n as f64;
                matrix[j * n + fi] = if f == -(n as i64) / 2 {
                    Complex64::new(phase.cos() / n as f64, 0.0)
                } else {
                    Complex64::new(phase.cos(), phase.sin()) / n as f64
                };
            }
        }

        let stride: usize = dims[axis + 1..].iter().product();
        let block = n * stride;
        let total = values.len();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (f, slot) in line.iter_mut().enumerate() {
                    *slot = values[base + f * stride];
                }
                for j in 0..n {
                    let row = &matrix[j * n..(j + 1) * n];
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (w, v) in row.iter().zip(&line) {
                        acc += w * v;
                    }
                    values[base + j * stride] = acc;
                }
            }
        }
    }
    Field::new(grid, values)
}

/// Largest x-dilation factor the grid can represent for this field:
/// min over x axes of n/(2·effective bandwidth).
pub fn max_resample_scale(u: &Field) -> f64 {
    let grid = u.grid();
    let dims = grid.dims();
    let mut values = u.values().to_vec();
    let mut t_max = f64::INFINITY;
    for axis in 0..grid.d {
        fft_axis(&mut values, &dims, axis, FftDirection::Forward);
        let b = effective_bandwidth(&values, &dims, axis);
        t_max = t_max.min(dims[axis] as f64 / (2.0 * b.max(1) as f64));
        fft_axis(&mut values, &dims, axis, FftDirection::Inverse);
        let scale = 1.0 / dims[axis] as f64;
        for v in &mut values {
            *v *= scale;
        }
    }
    t_max
}

/// Smallest band half-width along `axis` holding all but 1e−10 of the
/// spectral energy; content outside it aliases below 1e−5 in amplitude
/// and below 1e−10 in the quadratic functionals.
fn effective_bandwidth(spec: &[Complex64], dims: &[usize], axis: usize) -> i64 {
    let n = dims[axis];
    let mut energy = vec![0.0f64; n / 2 + 1];
    let stride: usize = dims[axis + 1..].iter().product();
    let block = n * stride;
    for outer in (0..spec.len()).step_by(block) {
        for inner in 0..stride {
            for fi in 0..n {
                let b = Grid::fft_signed(fi, n).unsigned_abs() as usize;
                energy[b] += spec[outer + inner + fi * stride].norm_sqr();
            }
        }
    }
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return 0;
    }
    let mut tail = 0.0;
    for b in (1..=n / 2).rev() {
        tail += energy[b];
        if tail > 1e-10 * total {
            return b as i64;
        }
    }
    1
}

/// Balakrishnan-formula evaluation of σ‖(−Δ_x)^{σ/2}u‖²:
///
///   ∫₀^∞ m^σ ‖∇_x u_m‖² dm,  u_m = √(sin(πσ)/π)·(m − Δ_x)^{−1} u,
///
/// with the resolvent applied as the Fourier multiplier 1/(m + |ξ|²).
/// The m-integral uses the substitution m = e^s and a composite
/// trapezoid rule with `n_quad` nodes on a symmetric interval whose
/// half-width grows like 1/min(σ, 1−σ), the decay rate of the
/// transformed integrand.
pub fn balakrishnan_kinetic(u: &Field, sigma: f64, n_quad: usize) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(FnlsError::InvalidParams(format!(
            "balakrishnan_kinetic needs sigma in (0,1), got {sigma}"
        )));
    }
    if n_quad < 16 {
        return Err(FnlsError::InvalidParams(format!("n_quad={n_quad} must be ≥ 16")));
    }
    let s_max = 48.0_f64.max(24.0 / sigma.min(1.0 - sigma));
    let h = 2.0 * s_max / (n_quad - 1) as f64;
    let nodes: Vec<(f64, f64)> = (0..n_quad)
        .map(|j| {
            let s = -s_max + j as f64 * h;
            let w = if j == 0 || j == n_quad - 1 { 0.5 * h } else { h };
            (s, w)
        })
        .collect();
    let prefactor = (PI * sigma).sin() / PI;

    // The weight depends on |ξ|² only; cache it per distinct value.
    let mut cache: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    let mut weight = |xi2: f64| -> f64 {
        if xi2 == 0.0 {
            return 0.0;
        }
        *cache.entry(xi2.to_bits()).or_insert_with(|| {
            let ln_xi2 = xi2.ln();
            let mut acc = 0.0;
            for &(s, w) in &nodes {
                // integrand e^{(σ+1)s}·ξ²/(e^s + ξ²)², evaluated in logs
                let ln_den = if s > ln_xi2 {
                    2.0 * (s + (xi2 * (-s).exp()).ln_1p())
                } else {
                    2.0 * (ln_xi2 + (s.exp() / xi2).ln_1p())
                };
                acc += w * ((sigma + 1.0) * s + ln_xi2 - ln_den).exp();
            }
            prefactor * acc
        })
    };

    let grid = u.grid();
    let mut spec = u.values().to_vec();
    fft_nd(&mut spec, &grid.dims(), FftDirection::Forward);
    let scale = grid.cell_volume() / grid.num_points() as f64;
    let mut acc = 0.0;
    grid.for_each_freq(|flat, xi2, _| {
        acc += weight(xi2) * spec[flat].norm_sqr();
    });
    Ok(acc * scale)
}
