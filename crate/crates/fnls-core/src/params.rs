use crate::error::{FnlsError, Result};

/// Which fractional Laplacian drives the model: `(-Δ_{x,y})^σ` with the
/// isotropic symbol `(|ξ|²+|k|²)^σ`, or the anisotropic sum
/// `(-Δ_x)^σ + (-Δ_y)^σ` with symbol `|ξ|^{2σ} + |k|^{2σ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaplacianKind {
    Isotropic,
    Anisotropic,
}

/// Position of the nonlinearity power relative to the mass-critical
/// exponent `4σ/(d+m)` and the Sobolev-critical exponent `2_σ*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criticality {
    Subcritical,
    MassCritical,
    Intercritical,
    Supercritical,
}

/// Physical/analytic parameters of the model on ℝ^d × T^m.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Euclidean dimension (1..=4).
    pub d: usize,
    /// Torus dimension (1..=2). The ℝ^d reference problems use m = 0.
    pub m: usize,
    /// Order of the fractional Laplacian, σ ∈ (0, 1]. σ = 1 is admitted
    /// as the classical validation limit.
    pub sigma: f64,
    /// Nonlinearity power α > 0 in |u|^α u.
    pub alpha: f64,
    pub kind: LaplacianKind,
}

impl ModelParams {
    pub fn new(d: usize, m: usize, sigma: f64, alpha: f64, kind: LaplacianKind) -> Result<Self> {
        if d == 0 || d > 4 {
            return Err(FnlsError::InvalidParams(format!("d={d} outside 1..=4")));
        }
        if m > 2 {
            return Err(FnlsError::InvalidParams(format!("m={m} outside 0..=2")));
        }
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(FnlsError::InvalidParams(format!(
                "sigma={sigma} outside (0, 1]"
            )));
        }
        if !(alpha > 0.0) {
            return Err(FnlsError::InvalidParams(format!("alpha={alpha} must be > 0")));
        }
        Ok(Self { d, m, sigma, alpha, kind })
    }

    /// Mass-critical exponent 4σ/(d+m).
    pub fn mass_critical_alpha(&self) -> f64 {
        4.0 * self.sigma / (self.d + self.m) as f64
    }

    /// Sobolev-critical exponent 2_σ* = 4σ/(d+m−2σ), or ∞ when d+m ≤ 2σ.
    pub fn sobolev_critical_alpha(&self) -> f64 {
        let n = (self.d + self.m) as f64;
        if n > 2.0 * self.sigma {
            4.0 * self.sigma / (n - 2.0 * self.sigma)
        } else {
            f64::INFINITY
        }
    }

    /// Total classification of α against the two critical exponents.
    pub fn criticality(&self) -> Criticality {
        let mc = self.mass_critical_alpha();
        let sc = self.sobolev_critical_alpha();
        if self.alpha < mc {
            Criticality::Subcritical
        } else if self.alpha == mc {
            Criticality::MassCritical
        } else if self.alpha < sc {
            Criticality::Intercritical
        } else {
            Criticality::Supercritical
        }
    }

    /// Same model restricted to the pure ℝ^d factor (m = 0), used by the
    /// semitrivial reference solvers.
    pub fn restrict_to_rd(&self) -> ModelParams {
        ModelParams { m: 0, ..*self }
    }
}
