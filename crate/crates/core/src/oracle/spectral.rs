//! Exact Neumann semigroup on a hemisphere for zonal data.
//!
//! A zonal function on the upper hemisphere extends evenly across the
//! equator; the extension has only even Legendre modes, each an eigenfunction
//! of the sphere Laplacian with eigenvalue `−l(l+1)/R²`.

use super::quadrature::{legendre_with_derivative, GaussLegendre};
use super::OracleError;

pub const ODD_MODE_TOL: f64 = 1e-10;

/// Legendre coefficients `c_l` of `Σ_k a_k c^k`, `l ≤ deg`.
pub fn legendre_coefficients(poly: &[f64]) -> Vec<f64> {
    let deg = poly.len().saturating_sub(1);
    let gl = GaussLegendre::new(deg + 2);
    let f = |c: f64| poly.iter().rev().fold(0.0, |acc, a| acc * c + a);
    (0..=deg)
        .map(|l| {
            let s: f64 = gl.nodes.iter().zip(&gl.weights).map(|(c, w)| w * f(*c) * legendre_with_derivative(l, *c).0).sum();
            0.5 * (2 * l + 1) as f64 * s
        })
        .collect()
}

/// Zonal data on the hemisphere as Legendre coefficients.
#[derive(Debug, Clone)]
pub struct ZonalSeries {
    pub radius: f64,
    pub coeffs: Vec<f64>,
}

impl ZonalSeries {
    /// From a polynomial in `cos θ` of degree at most `truncation`.
    pub fn from_polynomial(poly: &[f64], radius: f64, truncation: usize) -> Result<Self, OracleError> {
        if poly.len() > truncation + 1 {
            return Err(OracleError::Unsupported(format!("degree {} above truncation {truncation}", poly.len() - 1)));
        }
        let coeffs = legendre_coefficients(poly);
        if let Some(odd) = coeffs.iter().skip(1).step_by(2).map(|c| c.abs()).reduce(f64::max) {
            if odd > ODD_MODE_TOL {
                return Err(OracleError::OddModes(odd));
            }
        }
        Ok(Self { radius, coeffs })
    }

    /// Even extension of `g(cos θ)`, `cos θ ∈ [0, 1]`, truncated at degree
    /// `lmax`. `g` may have a kink at the equator; panels of Gauss rules
    /// resolve it.
    pub fn from_function(g: impl Fn(f64) -> f64, radius: f64, lmax: usize) -> Self {
        let gl = GaussLegendre::new(24);
        let (cs, ws) = gl.composite_points(0.0, 1.0, 64);
        let coeffs = (0..=lmax)
            .map(|l| {
                if l % 2 == 1 {
                    return 0.0;
                }
                let s: f64 = cs.iter().zip(&ws).map(|(c, w)| w * g(*c) * legendre_with_derivative(l, *c).0).sum();
                (2 * l + 1) as f64 * s
            })
            .collect();
        Self { radius, coeffs }
    }

    /// `P_t f` at polar angle `theta`.
    pub fn value(&self, theta: f64, t: f64) -> f64 {
        let c = theta.cos();
        let r2 = self.radius * self.radius;
        self.coeffs.iter().enumerate().map(|(l, a)| a * (-((l * (l + 1)) as f64) * t / r2).exp() * legendre_with_derivative(l, c).0).sum()
    }

    /// `∂_θ P_t f / R`, the signed gradient component along the meridian.
    pub fn meridian_gradient(&self, theta: f64, t: f64) -> f64 {
        let c = theta.cos();
        let r2 = self.radius * self.radius;
        let d: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(l, a)| a * (-((l * (l + 1)) as f64) * t / r2).exp() * legendre_with_derivative(l, c).1)
            .sum();
        -theta.sin() * d / self.radius
    }
}

/// `Σ c_l e^{−l(l+1)t} P_l(cos θ₀)` for `f` a polynomial in `cos θ`.
pub fn hemisphere_spectral(poly: &[f64], theta0: f64, t: f64, truncation: usize) -> Result<f64, OracleError> {
    Ok(ZonalSeries::from_polynomial(poly, 1.0, truncation)?.value(theta0, t))
}

/// `sin²θ = 1 − cos²θ` as a polynomial in `cos θ`.
pub const SIN2: [f64; 3] = [1.0, 0.0, -1.0];
