//! Pseudospectral solvers for the focusing fractional nonlinear
//! Schrödinger equation on waveguide manifolds ℝ^d × T^m: fixed-frequency
//! and normalized ground states, bifurcation-threshold scans,
//! Gagliardo–Nirenberg constants and split-step time dynamics.

pub mod error;
pub mod params;
pub mod grid;
pub mod field;
pub mod spectral;
pub mod functionals;
pub mod oracle;
pub mod ground_state;
pub mod io;

pub use error::{FnlsError, Result};
pub use field::Field;
pub use grid::Grid;
pub use params::{Criticality, LaplacianKind, ModelParams};
pub use spectral::{Multiplier, MultiplierDescriptor};
