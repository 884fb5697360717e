//! Deterministic references for the Monte Carlo estimators and the
//! inequality checks.

pub mod kernel;
pub mod pde;
pub mod quadrature;
pub mod spectral;
pub mod w2;

use thiserror::Error;

pub use kernel::{heat_kernel_1d, reflected_ou_kernel, KernelSpec, KernelTable, SpectralKernel};
pub use pde::{annulus_mode_solver, certified_solve, neumann_pde_1d, Certified, PdeGrid};
pub use quadrature::{GaussLegendre, MeasureRule};
pub use spectral::{hemisphere_spectral, ZonalSeries};
pub use w2::{w2_1d, Density1d};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("time {t} is not a multiple of the step {k}")]
    NotOnTimeGrid { t: f64, k: f64 },
    #[error("odd Legendre content {0:e} violates the Neumann condition")]
    OddModes(f64),
    #[error("density integrates to {0}, not 1")]
    NotNormalized(f64),
    #[error("kernel asymmetry {0:e} exceeds tolerance")]
    Asymmetric(f64),
    #[error("unsupported: {0}")]
    Unsupported(String),
}
