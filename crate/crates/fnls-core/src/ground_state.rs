//! Iterative ground-state solvers: semi-implicit gradient flow with
//! Nehari projection for the fixed-frequency problem c_ω (and its
//! rescaled and ℝ^d semitrivial variants), mass-constrained energy
//! descent for the normalized problems m_c, and fiber-projected descent
//! for the intercritical regime.

use std::path::PathBuf;
use std::sync::Arc;

use rustfft::num_complex::Complex64;

use crate::error::{FnlsError, Result};
use crate::field::Field;
use crate::functionals::{self, FunctionalReport};
use crate::grid::Grid;
use crate::params::{LaplacianKind, ModelParams};
use crate::spectral::{self, MultiplierDescriptor};

/// Solver initialization.
#[derive(Debug, Clone)]
pub enum InitKind {
    /// Gaussian bump, flat in y (semitrivial reference runs).
    GaussianFlat,
    /// Gaussian·(1 + ε cos y); lets the flow fall into y-dependent
    /// minima when they exist.
    GaussianYBroken { eps: f64 },
    /// Field snapshot in the binary format of the io module.
    FromFile(PathBuf),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Residual and relative-stall tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Pseudo-time step of the semi-implicit flow.
    pub tau: f64,
    pub init: InitKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iter: 20_000,
            tau: 0.5,
            init: InitKind::GaussianYBroken { eps: 0.1 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundStateResult {
    pub field: Field,
    /// Input frequency (fixed-frequency mode) or extracted Lagrange
    /// multiplier ω_c (normalized modes).
    pub omega: f64,
    pub report: FunctionalReport,
    /// Attained minimum: A_ω(φ) or E(u).
    pub c_value: f64,
    pub nehari_residual: f64,
    pub pohozaev_residual: f64,
    /// ‖(L + ω)u − |u|^α u‖₂ / ‖u‖₂.
    pub equation_residual: f64,
    /// y_kinetic / quadratic_form of the solved operator.
    pub y_dependence: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value at every accepted iteration (non-increasing).
    pub objective_trace: Vec<f64>,
}

fn initial_field(grid: &Arc<Grid>, init: &InitKind) -> Result<Field> {
    let u = match init {
        InitKind::GaussianFlat => Field::gaussian(grid.clone(), 1.0, 1.0),
        InitKind::GaussianYBroken { eps } => {
            Field::gaussian_y_broken(grid.clone(), 1.0, 1.0, *eps)
        }
        InitKind::FromFile(path) => {
            let (_, u) = crate::io::read_snapshot(path)?;
            if u.grid() != grid {
                return Err(FnlsError::InvalidParams(
                    "snapshot grid does not match the solver grid".into(),
                ));
            }
            u
        }
    };
    if !u.is_finite() || functionals::mass(&u) == 0.0 {
        return Err(FnlsError::InvalidParams("degenerate solver initialization".into()));
    }
    Ok(u)
}

/// Workspace shared by the flows: the operator symbol on the frequency
/// lattice, dealias mask and transform scratch.
struct Flow {
    grid: Arc<Grid>,
    dims: Vec<usize>,
    symbol: Vec<f64>,
    /// Parseval factor cell_volume/N for raw-spectrum sums.
    spectral_weight: f64,
    alpha: f64,
}

struct StepScalars {
    kinetic: f64,
    mass: f64,
    lp: f64,
}

impl Flow {
    fn new(grid: &Arc<Grid>, symbol: Vec<f64>, alpha: f64) -> Flow {
        Flow {
            grid: grid.clone(),
            dims: grid.dims(),
            symbol,
            spectral_weight: grid.cell_volume() / grid.num_points() as f64,
            alpha,
        }
    }

    fn from_descriptor(grid: &Arc<Grid>, desc: MultiplierDescriptor, alpha: f64) -> Result<Flow> {
        let mult = spectral::build_multiplier(grid, desc)?;
        Ok(Flow::new(grid, mult.values().to_vec(), alpha))
    }

    fn forward_raw(&self, u: &Field) -> Vec<Complex64> {
        let mut spec = u.values().to_vec();
        spectral::fft_nd_raw(&mut spec, &self.dims, true);
        spec
    }

    fn inverse_raw(&self, mut spec: Vec<Complex64>) -> Field {
        spectral::fft_nd_raw(&mut spec, &self.dims, false);
        let scale = 1.0 / self.grid.num_points() as f64;
        for v in &mut spec {
            *v *= scale;
        }
        Field::new(self.grid.clone(), spec).expect("flow produced non-finite iterate")
    }

    fn nonlinear(&self, u: &Field) -> Vec<Complex64> {
        u.values()
            .iter()
            .map(|v| v * v.norm().powf(self.alpha))
            .collect()
    }

    /// One semi-implicit step u ← (1 + τ(λ + ω))^{-1}(u + τ|u|^α u).
    /// The nonlinearity is evaluated pseudospectrally without masking:
    /// fractional ground states carry slowly decaying spectral tails, and
    /// a 2/3 truncation would perturb the solved equation far more than
    /// the super-Nyquist aliasing it removes.
    fn semi_implicit_step(&self, u: &Field, omega: f64, tau: f64) -> (Field, StepScalars) {
        let spec_u = self.forward_raw(u);
        let mut spec_n = self.nonlinear(u);
        spectral::fft_nd_raw(&mut spec_n, &self.dims, true);

        let mut spec_v = vec![Complex64::new(0.0, 0.0); spec_u.len()];
        for i in 0..spec_u.len() {
            spec_v[i] = (spec_u[i] + tau * spec_n[i]) / (1.0 + tau * (self.symbol[i] + omega));
        }

        let mut kinetic = 0.0;
        let mut mass = 0.0;
        for (i, v) in spec_v.iter().enumerate() {
            let p = v.norm_sqr();
            kinetic += self.symbol[i] * p;
            mass += p;
        }
        kinetic *= self.spectral_weight;
        mass *= self.spectral_weight;

        let v = self.inverse_raw(spec_v);
        let lp = functionals::lp_norm(&v, self.alpha);
        (v, StepScalars { kinetic, mass, lp })
    }

    /// ‖(λ + ω)u − |u|^α u‖₂ / ‖u‖₂ with the full nonlinearity.
    fn equation_residual(&self, u: &Field, omega: f64) -> f64 {
        let spec_u = self.forward_raw(u);
        let mut spec_n = self.nonlinear(u);
        spectral::fft_nd_raw(&mut spec_n, &self.dims, true);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..spec_u.len() {
            num += ((self.symbol[i] + omega) * spec_u[i] - spec_n[i]).norm_sqr();
            den += spec_u[i].norm_sqr();
        }
        (num / den.max(f64::MIN_POSITIVE)).sqrt()
    }

    fn quad(&self, u: &Field) -> f64 {
        let spec = self.forward_raw(u);
        self.spectral_weight
            * spec.iter().enumerate().map(|(i, v)| self.symbol[i] * v.norm_sqr()).sum::<f64>()
    }
}

fn y_dependence_of(flow: &Flow, u: &Field, sigma: f64) -> f64 {
    if flow.grid.m == 0 {
        return 0.0;
    }
    let quad = flow.quad(u);
    if quad == 0.0 {
        return 0.0;
    }
    functionals::y_kinetic(u, sigma) / quad
}

/// Shared Nehari-manifold flow: semi-implicit descent step followed by
/// the exact projection u ← ℓu with ℓ^α = (K + ωM)/lp, so B_ω(ℓu) = 0.
/// The flow minimizes A_ω restricted to the manifold; `omega` enters the
/// linear part and the projection.
fn run_nehari_flow(
    grid: &Arc<Grid>,
    desc: MultiplierDescriptor,
    params: &ModelParams,
    omega: f64,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    let flow = Flow::from_descriptor(grid, desc, params.alpha)?;
    let mut u = initial_field(grid, &cfg.init)?;
    let alpha = params.alpha;

    // initial projection onto the manifold
    {
        let kinetic = flow.quad(&u);
        let m = functionals::mass(&u);
        let lp = functionals::lp_norm(&u, alpha);
        let ell = ((kinetic + omega * m) / lp).powf(1.0 / alpha);
        u.scale(Complex64::new(ell, 0.0));
    }

    let action_of = |kinetic: f64, m: f64, lp: f64| {
        0.5 * kinetic + 0.5 * omega * m - lp / (alpha + 2.0)
    };

    let mut action = {
        let kinetic = flow.quad(&u);
        let m = functionals::mass(&u);
        let lp = functionals::lp_norm(&u, alpha);
        action_of(kinetic, m, lp)
    };

    let mut tau = cfg.tau;
    let mut trace = vec![action];
    let mut converged = false;
    let mut nehari_residual = f64::NAN;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let (v, s) = flow.semi_implicit_step(&u, omega, tau);
        // manifold drift of the unprojected step
        let h_norm = s.kinetic + omega * s.mass;
        let drift = (h_norm - s.lp).abs() / h_norm.max(f64::MIN_POSITIVE);

        // Nehari projection
        let ell = (h_norm / s.lp).powf(1.0 / alpha);
        let new_action = action_of(
            ell * ell * s.kinetic,
            ell * ell * s.mass,
            ell.powf(alpha + 2.0) * s.lp,
        );

        if new_action > action + 1e-14 * action.abs().max(1.0) {
            tau *= 0.5;
            if tau < 1e-6 * cfg.tau {
                // the flow map no longer decreases the action at any step
                // size; accept the iterate if it solves the equation
                converged = flow.equation_residual(&u, omega) < 1e3 * cfg.tol;
                break;
            }
            continue;
        }

        let mut v = v;
        v.scale(Complex64::new(ell, 0.0));
        let stalled = (action - new_action).abs() <= cfg.tol * action.abs().max(1.0);
        u = v;
        action = new_action;
        trace.push(action);
        tau = (tau * 1.05).min(cfg.tau);
        nehari_residual = drift;

        if drift < cfg.tol && stalled {
            converged = true;
            break;
        }
    }

    u.normalize_phase();
    let report = FunctionalReport::compute(&u, params, omega)?;
    let pohozaev_residual =
        functionals::pohozaev_q(&u, params).abs() / functionals::hs_norm_sq(&u, params.sigma);
    let equation_residual = flow.equation_residual(&u, omega);
    let y_dependence = y_dependence_of(&flow, &u, params.sigma);

    Ok(GroundStateResult {
        omega,
        c_value: action,
        nehari_residual,
        pohozaev_residual,
        equation_residual,
        y_dependence,
        iterations,
        converged,
        objective_trace: trace,
        report,
        field: u,
    })
}

/// Ground state of (−Δ)^σ φ + ωφ = |φ|^α φ minimizing A_ω on the Nehari
/// manifold; c_value is the attained c_ω = A_ω(φ).
pub fn solve_fixed_frequency(
    params: &ModelParams,
    omega: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    if !(omega > 0.0) {
        return Err(FnlsError::InvalidParams(format!("omega={omega} must be > 0")));
    }
    if params.alpha >= params.sobolev_critical_alpha() {
        return Err(FnlsError::RegimeViolation(format!(
            "alpha={} is Sobolev-supercritical",
            params.alpha
        )));
    }
    run_nehari_flow(grid, functionals::kinetic_descriptor(params), params, omega, cfg)
}

/// Rescaled unit-frequency problem c̄_ω: minimizes the action of
/// 𝓛^σ = (−Δ_x − ω^{−1/σ}Δ_y)^σ with unit frequency. The original value
/// is c_ω = ω^{(α+2)/α − d/(2σ)}·c̄_ω.
pub fn solve_rescaled_unit(
    params: &ModelParams,
    omega: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    if !(omega > 0.0) {
        return Err(FnlsError::InvalidParams(format!("omega={omega} must be > 0")));
    }
    let desc = MultiplierDescriptor::RescaledL { sigma: params.sigma, omega };
    run_nehari_flow(grid, desc, params, 1.0, cfg)
}

/// Exponent p(d) in c_ω = ω^p c̄_ω and ν_ω = ω^p ν₁: p = (α+2)/α − d/(2σ).
pub fn rescaling_exponent(params: &ModelParams) -> f64 {
    (params.alpha + 2.0) / params.alpha - params.d as f64 / (2.0 * params.sigma)
}

/// Semitrivial reference: the ℝ^d ground state Q₁ at unit frequency on an
/// m = 0 grid; c_value is ν₁ = Ã₁(Q₁).
pub fn solve_reference_rd(
    params: &ModelParams,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    if grid.m != 0 {
        return Err(FnlsError::InvalidParams("reference solver needs an m = 0 grid".into()));
    }
    let rd = params.restrict_to_rd();
    run_nehari_flow(grid, MultiplierDescriptor::PartialX { sigma: rd.sigma }, &rd, 1.0, cfg)
}

/// Q_ω on the reference grid via Q_ω(x) = ω^{1/α} Q₁(ω^{1/(2σ)} x).
pub fn rescaled_reference_profile(q1: &Field, params: &ModelParams, omega: f64) -> Result<Field> {
    let t = omega.powf(1.0 / (2.0 * params.sigma));
    let mut q = spectral::resample_x(q1, t)?;
    q.scale(Complex64::new(omega.powf(1.0 / params.alpha), 0.0));
    Ok(q)
}

/// Mass-constrained energy descent: semi-implicit step with the running
/// multiplier estimate ω_n = (lp − K)/M in the implicit part, followed by
/// exact rescaling to ‖u‖₂² = c. An optional kinetic trust region
/// rejects steps with ‖(−Δ)^{σ/2}u‖² ≥ ρ₀ (localized problem).
fn run_normalized_flow(
    grid: &Arc<Grid>,
    desc: MultiplierDescriptor,
    params: &ModelParams,
    c: f64,
    rho_guard: Option<f64>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    if !(c > 0.0) {
        return Err(FnlsError::InvalidParams(format!("mass c={c} must be > 0")));
    }
    let flow = Flow::from_descriptor(grid, desc, params.alpha)?;
    let alpha = params.alpha;

    let mut u = initial_field(grid, &cfg.init)?;
    {
        let s = (c / functionals::mass(&u)).sqrt();
        u.scale(Complex64::new(s, 0.0));
        if let Some(rho0) = rho_guard {
            // shrink the seed into the trust region if needed
            let mut tries = 0;
            while flow.quad(&u) >= rho0 && tries < 60 {
                // widen in x: resampling at t < 1 lowers the kinetic norm
                u = spectral::resample_x(&u, 0.8)?;
                let s = (c / functionals::mass(&u)).sqrt();
                u.scale(Complex64::new(s, 0.0));
                tries += 1;
            }
            if flow.quad(&u) >= rho0 {
                return Err(FnlsError::GuardActive { rho0 });
            }
        }
    }

    let energy_of =
        |kinetic: f64, lp: f64| 0.5 * kinetic - lp / (alpha + 2.0);
    let mut energy = {
        let kinetic = flow.quad(&u);
        energy_of(kinetic, functionals::lp_norm(&u, alpha))
    };
    let mut omega_n = {
        let kinetic = flow.quad(&u);
        (functionals::lp_norm(&u, alpha) - kinetic) / c
    };

    let mut tau = cfg.tau;
    let mut trace = vec![energy];
    let mut converged = false;
    let mut iterations = 0;
    let mut guard_rejections = 0usize;

    while iterations < cfg.max_iter {
        iterations += 1;
        // keep the implicit denominator positive
        let omega_impl = omega_n.max(-(0.95) / tau);
        let (v, s) = flow.semi_implicit_step(&u, omega_impl, tau);
        let scale = (c / s.mass).sqrt();
        let kinetic_new = scale * scale * s.kinetic;
        let lp_new = scale.powf(alpha + 2.0) * s.lp;
        let energy_new = energy_of(kinetic_new, lp_new);

        if let Some(rho0) = rho_guard {
            if kinetic_new >= rho0 {
                guard_rejections += 1;
                tau *= 0.5;
                if tau < 1e-8 * cfg.tau || guard_rejections > 200 {
                    return Err(FnlsError::GuardActive { rho0 });
                }
                continue;
            }
        }
        if energy_new > energy + 1e-14 * energy.abs().max(1.0) {
            tau *= 0.5;
            if tau < 1e-6 * cfg.tau {
                converged = flow.equation_residual(&u, omega_n) < 1e3 * cfg.tol;
                break;
            }
            continue;
        }

        let mut v = v;
        v.scale(Complex64::new(scale, 0.0));
        let stalled = (energy - energy_new).abs() <= cfg.tol * energy.abs().max(1.0);
        u = v;
        energy = energy_new;
        omega_n = (lp_new - kinetic_new) / c;
        trace.push(energy);
        tau = (tau * 1.05).min(cfg.tau);

        if stalled {
            let residual = flow.equation_residual(&u, omega_n);
            if residual < cfg.tol.max(1e-8) {
                converged = true;
                break;
            }
        }
    }

    u.normalize_phase();
    let omega_c = omega_n;
    let report = FunctionalReport::compute(&u, params, omega_c.max(f64::MIN_POSITIVE))?;
    let pohozaev_residual =
        functionals::pohozaev_q(&u, params).abs() / functionals::hs_norm_sq(&u, params.sigma);
    let equation_residual = flow.equation_residual(&u, omega_c);
    let h_norm = flow.quad(&u) + omega_c.abs() * c;
    let nehari_residual =
        (flow.quad(&u) + omega_c * c - functionals::lp_norm(&u, alpha)).abs() / h_norm;
    let y_dependence = y_dependence_of(&flow, &u, params.sigma);

    Ok(GroundStateResult {
        omega: omega_c,
        c_value: energy,
        nehari_residual,
        pohozaev_residual,
        equation_residual,
        y_dependence,
        iterations,
        converged,
        objective_trace: trace,
        report,
        field: u,
    })
}

/// Normalized ground state in the mass-subcritical regime: minimizes E
/// over S(c); the attained m_c is negative and the extracted multiplier
/// ω_c positive.
pub fn solve_normalized_subcritical(
    params: &ModelParams,
    c: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    if params.alpha >= params.mass_critical_alpha() {
        return Err(FnlsError::RegimeViolation(format!(
            "alpha={} is not mass-subcritical (4σ/(d+m) = {})",
            params.alpha,
            params.mass_critical_alpha()
        )));
    }
    run_normalized_flow(grid, functionals::kinetic_descriptor(params), params, c, None, cfg)
}

/// Normalized reference problem m̃_c on ℝ^d (m = 0 grid), subcritical.
pub fn solve_normalized_reference_rd(
    params: &ModelParams,
    c: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    if grid.m != 0 {
        return Err(FnlsError::InvalidParams("reference solver needs an m = 0 grid".into()));
    }
    let rd = params.restrict_to_rd();
    if rd.alpha >= rd.mass_critical_alpha() {
        return Err(FnlsError::RegimeViolation(format!(
            "alpha={} is not mass-subcritical on R^d (4σ/d = {})",
            rd.alpha,
            rd.mass_critical_alpha()
        )));
    }
    run_normalized_flow(
        grid,
        MultiplierDescriptor::PartialX { sigma: rd.sigma },
        &rd,
        c,
        None,
        cfg,
    )
}

/// Localized normalized problem m_c^{ρ₀}: energy descent restricted to
/// the kinetic ball ‖(−Δ)^{σ/2}u‖² < ρ₀.
pub fn solve_normalized_localized(
    params: &ModelParams,
    c: f64,
    rho0: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    let mc = params.mass_critical_alpha();
    let upper = (4.0 * params.sigma / params.d as f64).min(params.sobolev_critical_alpha());
    if !(params.alpha > mc && params.alpha < upper) {
        return Err(FnlsError::RegimeViolation(format!(
            "alpha={} outside the localized regime ({mc}, {upper})",
            params.alpha
        )));
    }
    if !(rho0 > 0.0) {
        return Err(FnlsError::InvalidParams(format!("rho0={rho0} must be > 0")));
    }
    run_normalized_flow(
        grid,
        functionals::kinetic_descriptor(params),
        params,
        c,
        Some(rho0),
        cfg,
    )
}

pub use fibered::minimize_i_penalized;
pub(crate) use fibered::{solve_fibered, FiberFamily};

/// Intercritical normalized ground state: minimizes E over the
/// Pohozaev-constrained sphere V(c) by fiber-projected tangent descent.
/// Isotropic kind requires α ≥ 4/d, m = 1 and σ ∈ ((d+1)/(d+2), 1);
/// anisotropic kind the wider α ∈ (4σ/d, 2_σ*) with σ ∈ (½, 1).
pub fn solve_intercritical(
    params: &ModelParams,
    c: f64,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<GroundStateResult> {
    let sc = params.sobolev_critical_alpha();
    match params.kind {
        LaplacianKind::Isotropic => {
            let lower = 4.0 / params.d as f64;
            let sig_lo = (params.d as f64 + 1.0) / (params.d as f64 + 2.0);
            if params.m != 1
                || !(params.alpha >= lower && params.alpha < sc)
                || !(params.sigma > sig_lo && params.sigma < 1.0)
            {
                return Err(FnlsError::RegimeViolation(format!(
                    "isotropic intercritical solver needs m=1, alpha in [{lower}, {sc}), \
                     sigma in ({sig_lo}, 1); got alpha={}, sigma={}, m={}",
                    params.alpha, params.sigma, params.m
                )));
            }
            solve_fibered(
                grid,
                FiberFamily::Lambda { sigma: params.sigma, lambda: 1.0 },
                params,
                c,
                cfg,
            )
        }
        LaplacianKind::Anisotropic => {
            let lower = 4.0 * params.sigma / params.d as f64;
            if !(params.alpha > lower && params.alpha < sc)
                || !(params.sigma > 0.5 && params.sigma < 1.0)
            {
                return Err(FnlsError::RegimeViolation(format!(
                    "anisotropic intercritical solver needs alpha in ({lower}, {sc}), \
                     sigma in (1/2, 1); got alpha={}, sigma={}",
                    params.alpha, params.sigma
                )));
            }
            solve_fibered(grid, FiberFamily::Aniso { sigma: params.sigma }, params, c, cfg)
        }
    }
}

mod fibered {
    use super::*;

    /// Weight family of the fibered energy t ↦ E(u^t) evaluated on the
    /// original spectrum; covers the isotropic problem (λ = 1), the
    /// λ-deformed operator 𝓛_λ = −Δ_x − λ∂_y² of the threshold scans,
    /// and the anisotropic model.
    #[derive(Debug, Clone, Copy)]
    pub(crate) enum FiberFamily {
        Lambda { sigma: f64, lambda: f64 },
        Aniso { sigma: f64 },
    }

    impl FiberFamily {
        pub(crate) fn sigma(&self) -> f64 {
            match *self {
                FiberFamily::Lambda { sigma, .. } | FiberFamily::Aniso { sigma } => sigma,
            }
        }

        /// Multiplier realizing the t = 1 operator.
        pub(crate) fn descriptor(&self) -> MultiplierDescriptor {
            match *self {
                FiberFamily::Lambda { sigma, lambda } => {
                    // (|ξ|² + λ|k|²)^σ = RescaledL with ω = λ^{−σ}
                    MultiplierDescriptor::RescaledL { sigma, omega: lambda.powf(-sigma) }
                }
                FiberFamily::Aniso { sigma } => MultiplierDescriptor::AnisoFrac { sigma },
            }
        }

        /// Kinetic weight of E(u^t).
        fn e_weight(&self, t: f64, xi2: f64, k2: f64) -> f64 {
            match *self {
                FiberFamily::Lambda { sigma, lambda } => {
                    (t * t * xi2 + lambda * k2).powf(sigma)
                }
                FiberFamily::Aniso { sigma } => {
                    t.powf(2.0 * sigma) * xi2.powf(sigma) + k2.powf(sigma)
                }
            }
        }

        /// Kinetic weight of Q(u^t) = t·dE(u^t)/dt.
        fn q_weight(&self, t: f64, xi2: f64, k2: f64) -> f64 {
            match *self {
                FiberFamily::Lambda { sigma, lambda } => {
                    if xi2 == 0.0 {
                        0.0
                    } else {
                        sigma * t * t * (t * t * xi2 + lambda * k2).powf(sigma - 1.0) * xi2
                    }
                }
                FiberFamily::Aniso { sigma } => {
                    sigma * t.powf(2.0 * sigma) * xi2.powf(sigma)
                }
            }
        }

        /// Operator symbol at t = 1 (the linear part of the equation).
        pub(crate) fn base_symbol(&self, xi2: f64, k2: f64) -> f64 {
            self.e_weight(1.0, xi2, k2)
        }
    }

    /// Spectrum cache: per-mode (|ξ|², |k|², |û|² weight) plus ‖u‖_{α+2}^{α+2}.
    struct FiberSpectrum {
        modes: Vec<(f64, f64, f64)>,
        lp: f64,
    }

    impl FiberSpectrum {
        fn new(flow: &Flow, u: &Field, alpha: f64) -> FiberSpectrum {
            let spec = flow.forward_raw(u);
            let mut modes = Vec::with_capacity(spec.len());
            flow.grid.for_each_freq(|flat, xi2, k2| {
                modes.push((xi2, k2, flow.spectral_weight * spec[flat].norm_sqr()));
            });
            FiberSpectrum { modes, lp: functionals::lp_norm(u, alpha) }
        }

        fn energy_at(&self, family: &FiberFamily, t: f64, alpha: f64, d: f64) -> f64 {
            let kin: f64 = self
                .modes
                .iter()
                .map(|&(xi2, k2, w)| family.e_weight(t, xi2, k2) * w)
                .sum();
            0.5 * kin - t.powf(alpha * d / 2.0) * self.lp / (alpha + 2.0)
        }

        fn q_at(&self, family: &FiberFamily, t: f64, alpha: f64, d: f64) -> f64 {
            let kin: f64 = self
                .modes
                .iter()
                .map(|&(xi2, k2, w)| family.q_weight(t, xi2, k2) * w)
                .sum();
            kin - alpha * d / (2.0 * (alpha + 2.0)) * t.powf(alpha * d / 2.0) * self.lp
        }

        /// Zero of t ↦ Q(u^t); closed form for the anisotropic family,
        /// bracketed bisection otherwise.
        fn critical_t(&self, family: &FiberFamily, alpha: f64, d: f64) -> Result<f64> {
            if let FiberFamily::Aniso { sigma } = *family {
                let kin: f64 =
                    self.modes.iter().map(|&(xi2, _, w)| xi2.powf(sigma) * w).sum();
                let a = sigma * kin;
                let b = alpha * d / (2.0 * (alpha + 2.0)) * self.lp;
                let expo = alpha * d / 2.0 - 2.0 * sigma;
                if a <= 0.0 || b <= 0.0 || expo <= 0.0 {
                    return Err(FnlsError::BracketFailure {
                        what: "degenerate anisotropic fiber".into(),
                        lo: 0.0,
                        hi: 0.0,
                    });
                }
                return Ok((a / b).powf(1.0 / expo));
            }
            let q = |t: f64| self.q_at(family, t, alpha, d);
            let mut lo = 1.0;
            let mut q_lo = q(lo);
            while q_lo <= 0.0 {
                lo *= 0.5;
                if lo < 1e-9 {
                    return Err(FnlsError::BracketFailure {
                        what: "fibered Q has no positive branch".into(),
                        lo: 1e-9,
                        hi: 1e9,
                    });
                }
                q_lo = q(lo);
            }
            let mut hi = 1.0f64.max(lo);
            while q(hi) >= 0.0 {
                hi *= 2.0;
                if hi > 1e9 {
                    return Err(FnlsError::BracketFailure {
                        what: "fibered Q has no negative branch".into(),
                        lo,
                        hi: 1e9,
                    });
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if q(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 * mid {
                    break;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }

    /// Warm start for the fibered descent: normalized ground states solve
    /// the stationary equation at some frequency, and the mass of the
    /// Nehari ground state φ_ω decreases in ω, so a bisection over ω
    /// lands on the V(c) minimizer directly.
    fn dual_seed(
        grid: &Arc<Grid>,
        family: FiberFamily,
        params: &ModelParams,
        c: f64,
        cfg: &SolverConfig,
    ) -> Result<Field> {
        let desc = family.descriptor();
        let sweep_cfg = SolverConfig {
            init: InitKind::GaussianYBroken { eps: 0.1 },
            ..cfg.clone()
        };
        let solve_at = |omega: f64| -> Result<(f64, Field)> {
            let r = run_nehari_flow(grid, desc, params, omega, &sweep_cfg)?;
            Ok((r.report.mass, r.field))
        };

        let mut lo = 1.0;
        let mut hi = 1.0;
        let (m1, f1) = solve_at(1.0)?;
        let mut best = ((m1 - c).abs() / c, f1);
        if m1 > c {
            // mass decreases with omega: move up
            for _ in 0..40 {
                hi *= 2.0;
                let (m, f) = solve_at(hi)?;
                let gap = (m - c).abs() / c;
                if gap < best.0 {
                    best = (gap, f);
                }
                if m <= c {
                    break;
                }
                lo = hi;
            }
        } else {
            for _ in 0..40 {
                lo *= 0.5;
                let (m, f) = solve_at(lo)?;
                let gap = (m - c).abs() / c;
                if gap < best.0 {
                    best = (gap, f);
                }
                if m >= c {
                    break;
                }
                hi = lo;
            }
        }
        for _ in 0..50 {
            let mid = (lo * hi).sqrt();
            let (m, f) = solve_at(mid)?;
            let gap = (m - c).abs() / c;
            if gap < best.0 {
                best = (gap, f);
            }
            if gap < 1e-10 || (hi - lo) < 1e-12 * mid {
                break;
            }
            if m > c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if std::env::var("FNLS_DEBUG").is_ok() {
            eprintln!("  dual_seed: best mass gap {:.3e}", best.0);
        }
        Ok(best.1)
    }

    /// Fiber-projected descent for m_c = inf{E(u): u ∈ S(c), Q(u) = 0},
    /// warm-started from the dual frequency sweep.
    pub(crate) fn solve_fibered(
        grid: &Arc<Grid>,
        family: FiberFamily,
        params: &ModelParams,
        c: f64,
        cfg: &SolverConfig,
    ) -> Result<GroundStateResult> {
        if !(c > 0.0) {
            return Err(FnlsError::InvalidParams(format!("mass c={c} must be > 0")));
        }
        let alpha = params.alpha;
        let d = params.d as f64;
        let mut symbol = vec![0.0; grid.num_points()];
        grid.for_each_freq(|flat, xi2, k2| symbol[flat] = family.base_symbol(xi2, k2));
        let flow = Flow::new(grid, symbol, alpha);

        let normalize_c = |u: &mut Field| {
            let s = (c / functionals::mass(u)).sqrt();
            u.scale(Complex64::new(s, 0.0));
        };

        // Fiber projection u ← u^{t*(u)} by resampling, staged so each
        // stage stays within the band limit of the current iterate.
        let project = |u: &Field| -> Result<(Field, f64)> {
            let mut w = u.clone();
            let mut t_total = 1.0;
            for _ in 0..64 {
                let spectrum = FiberSpectrum::new(&flow, &w, alpha);
                let t_star = spectrum.critical_t(&family, alpha, d)?;
                // verified against the freshly resampled iterate: resampling
                // aliasing shifts the critical point, so iterate until the
                // residual dilation is negligible
                if (t_star - 1.0).abs() < 1e-10 {
                    break;
                }
                // near-unit dilations alias only the top band sliver and
                // are always safe; consult the band limit beyond that
                let t_apply = if t_star <= 1.05 {
                    t_star.max(0.25)
                } else {
                    let t_cap = 0.9 * spectral::max_resample_scale(&w);
                    if t_cap <= 1.0 {
                        // compression unreachable at this resolution; leave
                        // the iterate and let the residual report it
                        break;
                    }
                    t_star.clamp(0.25, t_cap)
                };
                let mut next = functionals::scale_fiber(&w, t_apply)?;
                let s = (c / functionals::mass(&next)).sqrt();
                next.scale(Complex64::new(s, 0.0));
                w = next;
                t_total *= t_apply;
            }
            Ok((w, t_total))
        };

        let fibered_value = |u: &Field| -> Result<f64> {
            let spectrum = FiberSpectrum::new(&flow, u, alpha);
            let t_star = spectrum.critical_t(&family, alpha, d)?;
            Ok(spectrum.energy_at(&family, t_star, alpha, d))
        };

        // Seed: honor FromFile warm starts; otherwise run the dual
        // frequency sweep, which lands essentially on the minimizer.
        let mut u = match &cfg.init {
            InitKind::FromFile(_) => initial_field(grid, &cfg.init)?,
            _ => dual_seed(grid, family, params, c, cfg)?,
        };
        normalize_c(&mut u);
        let (w, _) = project(&u)?;
        u = w;
        let mut value = fibered_value(&u)?;

        let mut trace = vec![value];
        let mut converged = false;
        let mut iterations = 0;
        let mut step = 0.1;
        let mut grad_rel = f64::NAN;

        while iterations < cfg.max_iter {
            iterations += 1;

            // Riemannian gradient of E on S(c) in the (1 + L) metric:
            // grad = M^{-1}(∇E − θu) with θ chosen so ⟨grad, u⟩_{L²} = 0.
            // The preconditioner tames the stiff high frequencies and the
            // M-orthogonal projection keeps ⟨∇E, grad⟩ = ⟨r, M^{-1}r⟩ > 0.
            let spec_u = flow.forward_raw(&u);
            let mut spec_n = flow.nonlinear(&u);
            spectral::fft_nd_raw(&mut spec_n, &flow.dims, true);
            let n_modes = spec_u.len();
            let mut spec_ge = vec![Complex64::new(0.0, 0.0); n_modes];
            for i in 0..n_modes {
                spec_ge[i] = flow.symbol[i] * spec_u[i] - spec_n[i];
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n_modes {
                let pre = 1.0 / (1.0 + flow.symbol[i]);
                num += (spec_u[i].conj() * spec_ge[i]).re * pre;
                den += spec_u[i].norm_sqr() * pre;
            }
            let theta = num / den.max(f64::MIN_POSITIVE);
            let mut slope = 0.0;
            let mut spec_g = vec![Complex64::new(0.0, 0.0); n_modes];
            for i in 0..n_modes {
                let r = spec_ge[i] - theta * spec_u[i];
                let pre = 1.0 / (1.0 + flow.symbol[i]);
                slope += r.norm_sqr() * pre;
                spec_g[i] = r * pre;
            }
            slope *= flow.spectral_weight;
            let gt = flow.inverse_raw(spec_g);

            let kinetic_scale = flow.quad(&u).max(f64::MIN_POSITIVE);
            grad_rel = (slope * c).sqrt() / kinetic_scale;
            if grad_rel < 1e-8 {
                converged = true;
                break;
            }

            // Armijo backtracking on the fibered objective
            let mut accepted = false;
            for _ in 0..40 {
                let mut v = u.clone();
                for (vv, gv) in v.values_mut().iter_mut().zip(gt.values()) {
                    *vv -= step * gv;
                }
                normalize_c(&mut v);
                match fibered_value(&v) {
                    Ok(candidate) if candidate <= value - 1e-4 * step * slope => {
                        let (w, _) = project(&v)?;
                        u = w;
                        value = fibered_value(&u)?;
                        trace.push(value);
                        step = (step * 1.3).min(2.0);
                        accepted = true;
                        break;
                    }
                    _ => step *= 0.5,
                }
                if step < 1e-13 {
                    break;
                }
            }
            if !accepted {
                converged = grad_rel < 1e-5;
                break;
            }
            // stall detection on the accepted objective values
            let n_tr = trace.len();
            if n_tr > 6 {
                let recent = trace[n_tr - 6] - trace[n_tr - 1];
                if recent.abs() <= cfg.tol.max(1e-12) * value.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
        }

        let (w, _) = project(&u)?;
        u = w;
        u.normalize_phase();
        let m_c = fibered_value(&u)?;

        // Lagrange multiplier from the stationary equation restricted to
        // S(c): ω = (lp − quadratic form)/c
        let omega_c = (functionals::lp_norm(&u, alpha) - flow.quad(&u)) / c;
        let report = FunctionalReport::compute(&u, params, omega_c.abs().max(f64::MIN_POSITIVE))?;
        let spectrum = FiberSpectrum::new(&flow, &u, alpha);
        let q_res = spectrum.q_at(&family, 1.0, alpha, d).abs()
            / (family.sigma() * flow.quad(&u)).max(f64::MIN_POSITIVE);
        let equation_residual = flow.equation_residual(&u, omega_c);
        let y_dependence = y_dependence_of(&flow, &u, family.sigma());

        Ok(GroundStateResult {
            omega: omega_c,
            c_value: m_c,
            nehari_residual: grad_rel,
            pohozaev_residual: q_res,
            equation_residual,
            y_dependence,
            iterations,
            converged,
            objective_trace: trace,
            report,
            field: u,
        })
    }

    /// Penalized cross-check of the anisotropic identity
    /// m_c = inf{𝓘(u): u ∈ S(c), 𝓚(u) ≤ 0}: projected subgradient descent
    /// on 𝓘 + μ·max(𝓚, 0) from a generic seed.
    pub fn minimize_i_penalized(
        grid: &Arc<Grid>,
        params: &ModelParams,
        c: f64,
        mu: f64,
        max_iter: usize,
        seed_eps: f64,
    ) -> Result<f64> {
        let alpha = params.alpha;
        let d = params.d as f64;
        let sigma = params.sigma;
        let x_mult = spectral::build_multiplier(grid, MultiplierDescriptor::PartialX { sigma })?;
        let y_mult = spectral::build_multiplier(grid, MultiplierDescriptor::PartialY { sigma })?;

        let normalize_c = |u: &mut Field| {
            let s = (c / functionals::mass(u)).sqrt();
            u.scale(Complex64::new(s, 0.0));
        };
        let objective = |u: &Field| -> f64 {
            let k = functionals::k_aniso(u, params);
            functionals::i_aniso(u, params) + mu * k.max(0.0)
        };

        let mut u = Field::gaussian_y_broken(grid.clone(), 1.0, 1.0, seed_eps);
        normalize_c(&mut u);
        let mut value = objective(&u);
        let mut step = 0.1;
        let w_cell = grid.cell_volume();

        for _ in 0..max_iter {
            let k_val = functionals::k_aniso(&u, params);
            let ly = spectral::apply_multiplier(&u, &y_mult)?;
            let lx = spectral::apply_multiplier(&u, &x_mult)?;
            let coef_i = alpha * d / (4.0 * sigma) - 1.0;
            let mut g = Field::zeros(grid.clone());
            for i in 0..grid.num_points() {
                let uv = u.values()[i];
                let nl = uv * uv.norm().powf(alpha);
                let mut gi = ly.values()[i] + coef_i * nl;
                if k_val > 0.0 {
                    gi += mu * (2.0 * sigma * lx.values()[i] - alpha * d / 2.0 * nl);
                }
                g.values_mut()[i] = gi;
            }
            // tangent projection
            let inner: f64 =
                g.values().iter().zip(u.values()).map(|(a, b)| (a * b.conj()).re).sum::<f64>()
                    * w_cell;
            let coef = inner / c;
            for (gv, uv) in g.values_mut().iter_mut().zip(u.values()) {
                *gv -= coef * uv;
            }

            let mut improved = false;
            for _ in 0..30 {
                let mut v = u.clone();
                for (vv, gv) in v.values_mut().iter_mut().zip(g.values()) {
                    *vv -= step * gv;
                }
                normalize_c(&mut v);
                let cand = objective(&v);
                if cand < value {
                    u = v;
                    value = cand;
                    step = (step * 1.2).min(0.5);
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            if !improved || step < 1e-13 {
                break;
            }
        }
        Ok(objective(&u))
    }
}
