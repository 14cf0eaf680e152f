//! Independent brute-force references used by tests: dense DFT-matrix
//! multiplier application, finite-difference functional gradients, and
//! 1-D parameter searches. Each oracle is algorithmically independent of
//! the fast path it validates.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{FnlsError, Result};
use crate::field::Field;
use crate::functionals::{energy, scale_fiber};
use crate::grid::Grid;
use crate::params::ModelParams;
use crate::spectral::MultiplierDescriptor;

const DENSE_SIZE_CAP: usize = 256;

/// Dense realization of transform → multiply → inverse as an explicit
/// matrix M[a][b] = (1/N) Σ_ĵ value(ĵ) e^{iθ_ĵ·(a−b)}.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub size: usize,
    /// row-major N×N complex matrix
    pub matrix: Vec<Complex64>,
}

impl DenseOperator {
    pub fn assemble(grid: &Arc<Grid>, descriptor: MultiplierDescriptor) -> Result<DenseOperator> {
        let n = grid.num_points();
        if n > DENSE_SIZE_CAP {
            return Err(FnlsError::InvalidParams(format!(
                "dense oracle capped at {DENSE_SIZE_CAP} points, grid has {n}"
            )));
        }
        let dims = grid.dims();
        let ndim = dims.len();

        // per-point multi-indices
        let mut multi = vec![vec![0usize; ndim]; n];
        {
            let mut idx = vec![0usize; ndim];
            for point in multi.iter_mut() {
                point.copy_from_slice(&idx);
                for a in (0..ndim).rev() {
                    idx[a] += 1;
                    if idx[a] < dims[a] {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        }
        let mut symbol = vec![0.0; n];
        grid.for_each_freq(|flat, xi2, k2| symbol[flat] = descriptor.value(xi2, k2));

        let mut matrix = vec![Complex64::new(0.0, 0.0); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    let mut phase = 0.0;
                    for axis in 0..ndim {
                        let diff = multi[a][axis] as f64 - multi[b][axis] as f64;
                        phase += 2.0 * PI * multi[j][axis] as f64 * diff / dims[axis] as f64;
                    }
                    acc += symbol[j] * Complex64::new(phase.cos(), phase.sin());
                }
                matrix[a * n + b] = acc / n as f64;
            }
        }
        Ok(DenseOperator { size: n, matrix })
    }

    pub fn hermitian_defect(&self) -> f64 {
        let n = self.size;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.matrix[a * n + b] - self.matrix[b * n + a].conj()).norm());
            }
        }
        worst
    }

    pub fn apply_raw(&self, values: &[Complex64]) -> Vec<Complex64> {
        let n = self.size;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for a in 0..n {
            let row = &self.matrix[a * n..(a + 1) * n];
            out[a] = row.iter().zip(values).map(|(m, v)| m * v).sum();
        }
        out
    }
}

/// Ground-truth multiplier application through the dense DFT matrix.
pub fn dense_apply(u: &Field, descriptor: MultiplierDescriptor) -> Result<Field> {
    let op = DenseOperator::assemble(u.grid(), descriptor)?;
    Field::new(u.grid().clone(), op.apply_raw(u.values()))
}

/// Central-difference L² gradient of a scalar functional: the returned
/// field g satisfies F(u + εh) ≈ F(u) + Re⟨g, h⟩·(cell volume)·... with
/// the quadrature weight divided out, so g matches analytic L² gradients
/// like ∇mass = 2u.
pub fn fd_gradient(functional: impl Fn(&Field) -> f64, u: &Field, h: f64) -> Result<Field> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(FnlsError::InvalidParams(format!("fd step h={h} outside [1e-6, 1e-3]")));
    }
    let w = u.grid().cell_volume();
    let n = u.grid().num_points();
    let mut grad = vec![Complex64::new(0.0, 0.0); n];
    let mut probe = u.clone();
    for i in 0..n {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + h;
        let fp = functional(&probe);
        probe.values_mut()[i] = orig - h;
        let fm = functional(&probe);
        probe.values_mut()[i] = orig + Complex64::new(0.0, h);
        let fip = functional(&probe);
        probe.values_mut()[i] = orig - Complex64::new(0.0, h);
        let fim = functional(&probe);
        probe.values_mut()[i] = orig;
        grad[i] = Complex64::new((fp - fm) / (2.0 * h), (fip - fim) / (2.0 * h)) / w;
    }
    Field::new(u.grid().clone(), grad)
}

/// Argmax of E(u^t) over an explicit t grid; brackets the bisection root
/// of Q(u^t) within one cell.
pub fn fiber_grid_search(u: &Field, params: &ModelParams, t_grid: &[f64]) -> Result<f64> {
    let mut best_t = f64::NAN;
    let mut best_e = f64::NEG_INFINITY;
    for &t in t_grid {
        let e = energy(&scale_fiber(u, t)?, params);
        if e > best_e {
            best_e = e;
            best_t = t;
        }
    }
    if best_t.is_nan() {
        return Err(FnlsError::InvalidParams("empty t grid".into()));
    }
    Ok(best_t)
}

/// Logarithmic grid over [lo, hi].
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{fiber_critical_t, lp_norm, mass};
    use crate::params::LaplacianKind;
    use crate::spectral::{apply_multiplier, build_multiplier};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Arc<Grid>, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.num_points())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Field::new(grid.clone(), values).unwrap()
    }

    fn all_descriptors() -> Vec<MultiplierDescriptor> {
        vec![
            MultiplierDescriptor::IsoFrac { sigma: 0.6 },
            MultiplierDescriptor::AnisoFrac { sigma: 0.6 },
            MultiplierDescriptor::RescaledL { sigma: 0.6, omega: 2.5 },
            MultiplierDescriptor::PohozaevWeight { sigma: 0.6 },
            MultiplierDescriptor::PartialX { sigma: 0.6 },
            MultiplierDescriptor::PartialY { sigma: 0.6 },
        ]
    }

    #[test]
    fn dense_agrees_with_fast_path_on_8x8() {
        let grid = Grid::new(1, 1, 8.0, 8, 8).unwrap();
        let u = random_field(&grid, 1);
        for desc in all_descriptors() {
            let fast = apply_multiplier(&u, &build_multiplier(&grid, desc).unwrap()).unwrap();
            let dense = dense_apply(&u, desc).unwrap();
            let scale = fast.max_abs().max(1.0);
            let err = fast
                .values()
                .iter()
                .zip(dense.values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12 * scale, "{desc:?}: dense mismatch {err}");
        }
    }

    #[test]
    fn dense_matrix_is_hermitian_and_psd() {
        let grid = Grid::new(1, 1, 8.0, 8, 8).unwrap();
        let op =
            DenseOperator::assemble(&grid, MultiplierDescriptor::IsoFrac { sigma: 0.7 }).unwrap();
        assert!(op.hermitian_defect() < 1e-12);
        for seed in 0..20 {
            let z = random_field(&grid, seed);
            let mz = op.apply_raw(z.values());
            let quad: Complex64 =
                z.values().iter().zip(&mz).map(|(a, b)| a.conj() * b).sum();
            assert!(quad.im.abs() < 1e-10);
            assert!(quad.re > -1e-10);
        }
    }

    #[test]
    fn dense_zero_field_and_size_guard() {
        let grid = Grid::new(1, 1, 8.0, 8, 8).unwrap();
        let z = Field::zeros(grid);
        let out = dense_apply(&z, MultiplierDescriptor::AnisoFrac { sigma: 0.5 }).unwrap();
        assert_eq!(out.max_abs(), 0.0);

        let big = Grid::new(1, 1, 8.0, 64, 8).unwrap();
        let u = Field::zeros(big);
        assert!(dense_apply(&u, MultiplierDescriptor::IsoFrac { sigma: 0.5 }).is_err());
    }

    #[test]
    fn fd_gradient_of_mass_is_2u() {
        let grid = Grid::new(1, 1, 4.0, 4, 4).unwrap();
        let u = random_field(&grid, 3);
        let g = fd_gradient(mass, &u, 1e-4).unwrap();
        let err = g
            .values()
            .iter()
            .zip(u.values())
            .map(|(g, u)| (g - 2.0 * u).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "∇mass error {err}");
        assert!(fd_gradient(mass, &u, 1e-2).is_err());
    }

    #[test]
    fn fd_gradient_of_energy_matches_analytic() {
        let p = ModelParams::new(1, 1, 0.75, 2.0, LaplacianKind::Isotropic).unwrap();
        let grid = Grid::new(1, 1, 4.0, 4, 4).unwrap();
        let u = random_field(&grid, 5);
        let g = fd_gradient(|v| energy(v, &p), &u, 1e-4).unwrap();
        // ∇E = Lu − |u|^α u
        let mult =
            build_multiplier(&grid, MultiplierDescriptor::IsoFrac { sigma: p.sigma }).unwrap();
        let lu = apply_multiplier(&u, &mult).unwrap();
        let mut worst = 0.0f64;
        for i in 0..grid.num_points() {
            let v = u.values()[i];
            let analytic = lu.values()[i] - v.norm().powf(p.alpha) * v;
            worst = worst.max((g.values()[i] - analytic).norm());
        }
        assert!(worst < 1e-6, "∇E error {worst}");

        // descent-direction alignment ⟨analytic, fd⟩/(|analytic||fd|) ≈ 1
        let dot: f64 = (0..grid.num_points())
            .map(|i| {
                let v = u.values()[i];
                let analytic = lu.values()[i] - v.norm().powf(p.alpha) * v;
                (g.values()[i].conj() * analytic).re
            })
            .sum();
        let na: f64 = (0..grid.num_points())
            .map(|i| {
                let v = u.values()[i];
                (lu.values()[i] - v.norm().powf(p.alpha) * v).norm_sqr()
            })
            .sum::<f64>()
            .sqrt();
        let nf: f64 = g.values().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(dot / (na * nf) > 1.0 - 1e-4, "alignment {}", dot / (na * nf));
    }

    #[test]
    fn fd_nehari_transversality() {
        // at a Nehari point, ⟨B'(u), u⟩ = −α(K + ωM)
        let p = ModelParams::new(1, 1, 0.75, 2.0, LaplacianKind::Isotropic).unwrap();
        let grid = Grid::new(1, 1, 4.0, 4, 4).unwrap();
        let omega = 1.0;
        let mut u = random_field(&grid, 8);
        let kinetic = crate::functionals::kinetic_form(&u, &p);
        let ell =
            ((kinetic + omega * mass(&u)) / lp_norm(&u, p.alpha)).powf(1.0 / p.alpha);
        u.scale(Complex64::new(ell, 0.0));

        let b = |v: &Field| {
            crate::functionals::kinetic_form(v, &p) + omega * mass(v) - lp_norm(v, p.alpha)
        };
        let g = fd_gradient(b, &u, 1e-4).unwrap();
        let w = grid.cell_volume();
        let pairing: f64 =
            g.values().iter().zip(u.values()).map(|(g, v)| (g.conj() * v).re).sum::<f64>() * w;
        let expected =
            -p.alpha * (crate::functionals::kinetic_form(&u, &p) + omega * mass(&u));
        assert!(
            (pairing - expected).abs() < 1e-5 * expected.abs(),
            "⟨B',u⟩ {pairing} vs {expected}"
        );
    }

    #[test]
    fn grid_search_brackets_bisection() {
        let p = ModelParams::new(1, 1, 0.75, 4.0, LaplacianKind::Anisotropic).unwrap();
        let grid = Grid::new(1, 1, 16.0, 128, 8).unwrap();
        let u = Field::gaussian(grid, 1.0, 1.2);
        let t_star = fiber_critical_t(&u, &p).unwrap();
        let t_grid = log_grid(1e-2, 2.0, 120);
        let t_best = fiber_grid_search(&u, &p, &t_grid).unwrap();
        let ratio = t_grid[1] / t_grid[0];
        assert!(
            t_best / ratio <= t_star && t_star <= t_best * ratio,
            "grid argmax {t_best} does not bracket {t_star}"
        );
    }

    #[test]
    fn fiber_energy_trends() {
        // α > 4σ/d: E(u^t) > 0 for small t, → −∞ for large t
        let p = ModelParams::new(1, 1, 0.75, 4.0, LaplacianKind::Anisotropic).unwrap();
        let grid = Grid::new(1, 1, 16.0, 128, 8).unwrap();
        let u = Field::gaussian(grid, 1.0, 1.2);
        let e_small = energy(&scale_fiber(&u, 0.2).unwrap(), &p);
        assert!(e_small > 0.0, "E(u^0.2) = {e_small}");
        let e1 = energy(&scale_fiber(&u, 1.5).unwrap(), &p);
        let e2 = energy(&scale_fiber(&u, 2.0).unwrap(), &p);
        assert!(e2 < e1 && e2 < 0.0, "no downward trend: {e1}, {e2}");
    }
}
