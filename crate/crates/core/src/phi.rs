//! Positive weight fields `φ` and the modified curvature tensors built from them.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{self, GeometryError, ManifoldSpec, MetricGrid};
use crate::linalg::{self, Mat2, Vec2, ZERO2};
use crate::parallel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhiError {
    #[error("exponent p = {0} is not supported (only 1 and 2)")]
    InvalidExponent(u32),
    #[error("grid of {0} points per axis is too coarse (need at least 8)")]
    GridTooCoarse(usize),
    #[error("φ must be strictly positive, found {value} at {point:?}")]
    NonPositive { point: Vec2, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A strictly positive scalar field `φ = e^ψ`.
#[derive(Debug, Clone, Default)]
pub enum PhiField {
    #[default]
    One,
    /// `ψ(r) = Σ_k c_k (r − r0)^k` with `r = |x − center|` in chart coordinates.
    RadialExp { center: Vec2, r0: f64, coeffs: Vec<f64> },
    /// Values read from the `g11` plane of a grid file.
    Tabulated(Arc<MetricGrid>),
}

impl PhiField {
    /// The annulus field `ψ(r) = (r − 1) − (r − 1)²/2` centred at the origin.
    pub fn annulus_default() -> Self {
        PhiField::RadialExp { center: ZERO2, r0: 1.0, coeffs: vec![0.0, 1.0, -0.5] }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, PhiField::One)
    }

    fn radial(center: &Vec2, x: &Vec2) -> (f64, Vec2) {
        let d = linalg::sub(x, center);
        let r = d[0].hypot(d[1]);
        (r, d)
    }

    /// `ψ(x) = log φ(x)`.
    #[inline]
    pub fn log_value(&self, x: &Vec2) -> f64 {
        match self {
            PhiField::One => 0.0,
            PhiField::RadialExp { center, r0, coeffs } => {
                let (r, _) = Self::radial(center, x);
                let s = r - r0;
                coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
            }
            PhiField::Tabulated(grid) => grid.metric(x)[0][0].ln(),
        }
    }

    #[inline]
    pub fn value(&self, x: &Vec2) -> f64 {
        match self {
            PhiField::One => 1.0,
            PhiField::Tabulated(grid) => grid.metric(x)[0][0],
            _ => self.log_value(x).exp(),
        }
    }

    /// Chart partials `∂_i log φ`.
    #[inline]
    pub fn dlog(&self, m: &ManifoldSpec, x: &Vec2) -> Vec2 {
        match self {
            PhiField::One => ZERO2,
            PhiField::RadialExp { center, r0, coeffs } => {
                let (r, d) = Self::radial(center, x);
                if r == 0.0 {
                    return ZERO2;
                }
                let dpsi = horner_derivative(coeffs, r - r0);
                if m.dim() == 1 {
                    [dpsi * d[0].signum(), 0.0]
                } else {
                    linalg::scale(&d, dpsi / r)
                }
            }
            PhiField::Tabulated(_) => geometry::stencil(m).partials(&|y: &Vec2| self.log_value(y), x, m.dim()),
        }
    }

    /// `∇ log φ` in chart components.
    #[inline]
    pub fn grad_log(&self, m: &ManifoldSpec, x: &Vec2) -> Vec2 {
        if self.is_one() {
            return ZERO2;
        }
        let d = self.dlog(m, x);
        if m.is_flat_chart() {
            d
        } else {
            let dim = m.dim();
            let ginv = linalg::inverse(&m.metric(x), dim).unwrap_or(linalg::IDENTITY2);
            linalg::mat_vec(&ginv, &d, dim)
        }
    }

    /// `|∇ log φ|²_g`.
    #[inline]
    pub fn grad_log_sq(&self, m: &ManifoldSpec, x: &Vec2) -> f64 {
        if self.is_one() {
            return 0.0;
        }
        let d = self.dlog(m, x);
        if m.is_flat_chart() {
            d[0] * d[0] + d[1] * d[1]
        } else {
            let dim = m.dim();
            let ginv = linalg::inverse(&m.metric(x), dim).unwrap_or(linalg::IDENTITY2);
            linalg::form(&ginv, &d, &d, dim)
        }
    }

    /// `φ^p L φ^{-p} = p²|∇ log φ|² − p L log φ`.
    pub fn phi_l_phi(&self, m: &ManifoldSpec, p: u32, x: &Vec2) -> f64 {
        if self.is_one() {
            return 0.0;
        }
        let p = p as f64;
        let l_log = geometry::generator_raw(m, &|y: &Vec2| self.log_value(y), x);
        p * p * self.grad_log_sq(m, x) - p * l_log
    }

    /// `L(φ^{-p})` by finite differences.
    pub fn l_phi_inv(&self, m: &ManifoldSpec, p: u32, x: &Vec2) -> f64 {
        if self.is_one() {
            return 0.0;
        }
        geometry::generator_raw(m, &|y: &Vec2| (-(p as f64) * self.log_value(y)).exp(), x)
    }
}

fn horner_derivative(coeffs: &[f64], s: f64) -> f64 {
    let mut acc = 0.0;
    for k in (1..coeffs.len()).rev() {
        acc = acc * s + k as f64 * coeffs[k];
    }
    acc
}

fn check_p(p: u32) -> Result<(), PhiError> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(PhiError::InvalidExponent(p))
    }
}

/// The form `Ric − ∇Z − (1/p)(φ^p L φ^{-p}) g` at `x`.
pub fn modified_tensor(m: &ManifoldSpec, phi: &PhiField, p: u32, x: &Vec2) -> Result<Mat2, PhiError> {
    check_p(p)?;
    let mut t = geometry::bakry_emery(m, x)?;
    if !phi.is_one() {
        let c = phi.phi_l_phi(m, p, x) / p as f64;
        let g = m.metric(x);
        for i in 0..2 {
            for j in 0..2 {
                t[i][j] -= c * g[i][j];
            }
        }
    }
    Ok(t)
}

/// `Ric_Z^{φ,p}(X, X)`.
pub fn modified_ricci(m: &ManifoldSpec, phi: &PhiField, p: u32, x: &Vec2, v: &Vec2) -> Result<f64, PhiError> {
    let t = modified_tensor(m, phi, p, x)?;
    Ok(linalg::form(&t, v, v, m.dim()))
}

/// Inward normal at a boundary point, closed form when the chart has one.
pub fn boundary_normal(m: &ManifoldSpec, x: &Vec2) -> Result<Vec2, GeometryError> {
    match m.exact_normal(x) {
        Some(n) => Ok(n),
        None => geometry::inward_normal(m, x),
    }
}

/// `II(X, X)/|X|²` at a boundary point, closed form when available.
fn unit_second_fundamental_form(m: &ManifoldSpec, x: &Vec2) -> Result<f64, GeometryError> {
    if m.dim() == 1 {
        return Ok(0.0);
    }
    if let Some(v) = m.exact_second_fundamental_form(x) {
        return Ok(v);
    }
    let t = geometry::unit_tangent(m, x)?;
    geometry::second_fundamental_form(m, x, &t, &t)
}

/// `(N log φ)(x)` on the boundary.
pub fn normal_log_derivative(m: &ManifoldSpec, phi: &PhiField, x: &Vec2) -> Result<f64, GeometryError> {
    if phi.is_one() {
        return Ok(0.0);
    }
    let n = boundary_normal(m, x)?;
    let d = phi.dlog(m, x);
    Ok(d[0] * n[0] + if m.dim() == 2 { d[1] * n[1] } else { 0.0 })
}

/// `φ(x)^{-1} (II(X,X) + (N log φ)(x)|X|²)`: the second fundamental form of
/// the boundary under the metric `φ^{-2} g`.
pub fn conformal_second_fundamental_form(m: &ManifoldSpec, phi: &PhiField, x: &Vec2, v: &Vec2) -> Result<f64, PhiError> {
    if m.dim() == 1 {
        return Ok(0.0);
    }
    let (t, _) = geometry::tangential_projection(m, x, v);
    let len2 = linalg::form(&m.metric(x), &t, &t, 2);
    let ii = unit_second_fundamental_form(m, x)? * len2;
    let nl = normal_log_derivative(m, phi, x)?;
    Ok((ii + nl * len2) / phi.value(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        })
    }
}

/// Tolerances of the class-𝒟 conditions.
pub const INF_PHI_TOL: f64 = 1e-6;
pub const NORMAL_DERIVATIVE_TOL: f64 = 1e-6;
pub const CONVEXITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ClassDReport {
    pub inf_phi: f64,
    pub sup_phi: f64,
    /// (a) `inf φ = 1`
    pub inf_status: Status,
    /// (b) `max |Nφ|` on the boundary samples
    pub max_normal_derivative: f64,
    pub normal_status: Status,
    /// (c) `min [II(X,X) + N log φ]` over unit tangential `X`
    pub min_convexity: f64,
    pub argmin: Vec2,
    pub convexity_status: Status,
    pub boundary_points: usize,
}

impl ClassDReport {
    /// Overall verdict: the worst of the three conditions.
    pub fn status(&self) -> Status {
        [self.inf_status, self.normal_status, self.convexity_status]
            .into_iter()
            .max_by_key(|s| match s {
                Status::Pass => 0,
                Status::Warn => 1,
                Status::Fail => 2,
            })
            .unwrap_or(Status::Pass)
    }

    pub fn convexity_holds(&self) -> bool {
        self.convexity_status == Status::Pass
    }
}

/// Points per axis of the default verification grid.
pub const DEFAULT_GRID: usize = 41;

/// Checks the three class-𝒟 conditions on a sampling grid. Condition (b) is
/// a warning unless `strict`.
pub fn class_d_check(m: &ManifoldSpec, phi: &PhiField, strict: bool, n: usize) -> Result<ClassDReport, PhiError> {
    let pts = m.grid_points(n);
    let mut inf_phi = f64::INFINITY;
    let mut sup_phi = f64::NEG_INFINITY;
    for p in &pts {
        let v = phi.value(p);
        if !(v > 0.0) {
            return Err(PhiError::NonPositive { point: *p, value: v });
        }
        inf_phi = inf_phi.min(v);
        sup_phi = sup_phi.max(v);
    }
    let bpts = m.boundary_points(4 * n);
    let mut max_nphi: f64 = 0.0;
    let mut min_c = f64::INFINITY;
    let mut argmin = ZERO2;
    for p in &bpts {
        let nl = normal_log_derivative(m, phi, p)?;
        max_nphi = max_nphi.max((nl * phi.value(p)).abs());
        if m.dim() == 2 {
            let c = unit_second_fundamental_form(m, p)? + nl;
            if c < min_c {
                min_c = c;
                argmin = *p;
            }
        }
    }
    let (min_c, convexity_status) =
        if m.dim() == 1 { (0.0, Status::Pass) } else { (min_c, if min_c >= -CONVEXITY_TOL { Status::Pass } else { Status::Fail }) };
    Ok(ClassDReport {
        inf_phi,
        sup_phi,
        inf_status: if (inf_phi - 1.0).abs() <= INF_PHI_TOL { Status::Pass } else { Status::Fail },
        max_normal_derivative: max_nphi,
        normal_status: if max_nphi <= NORMAL_DERIVATIVE_TOL {
            Status::Pass
        } else if strict {
            Status::Fail
        } else {
            Status::Warn
        },
        min_convexity: min_c,
        argmin,
        convexity_status,
        boundary_points: bpts.len(),
    })
}

/// `sup φ` over the verification grid.
pub fn sup_norm(m: &ManifoldSpec, phi: &PhiField, n: usize) -> f64 {
    if phi.is_one() {
        return 1.0;
    }
    m.grid_points(n).iter().map(|p| phi.value(p)).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvatureBoundReport {
    pub p: u32,
    pub grid: usize,
    /// Greatest lower bound found, net of `margin`.
    pub k: f64,
    /// Raw minimum over the grid.
    pub raw_min: f64,
    pub margin: f64,
    pub argmin: Vec2,
    /// `(point, smallest generalised eigenvalue)` per grid point.
    pub table: Vec<(Vec2, f64)>,
}

/// Safety margin subtracted from the grid minimum, in units of `h_geo²`.
pub const MARGIN_FACTOR: f64 = 10.0;

/// Lower bound of `Ric_Z^{φ,p}` relative to `g` over a grid with `n`
/// points per axis plus boundary samples.
pub fn curvature_lower_bound(m: &ManifoldSpec, phi: &PhiField, p: u32, n: usize) -> Result<CurvatureBoundReport, PhiError> {
    check_p(p)?;
    if n < 8 {
        return Err(PhiError::GridTooCoarse(n));
    }
    let pts = m.grid_points(n);
    let dim = m.dim();
    let vals = parallel::map_indexed(pts.len(), |k| -> Result<f64, PhiError> {
        let x = &pts[k];
        let t = modified_tensor(m, phi, p, x)?;
        Ok(linalg::min_generalized_eigenvalue(&t, &m.metric(x), dim))
    });
    let mut table = Vec::with_capacity(pts.len());
    let mut raw_min = f64::INFINITY;
    let mut argmin = ZERO2;
    for (x, v) in pts.iter().zip(vals) {
        let v = v?;
        if v < raw_min {
            raw_min = v;
            argmin = *x;
        }
        table.push((*x, v));
    }
    let margin = MARGIN_FACTOR * m.h_geo * m.h_geo;
    Ok(CurvatureBoundReport { p, grid: n, k: raw_min - margin, raw_min, margin, argmin, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radial_field_derivatives() {
        let m = ManifoldSpec::annulus(1.0, 2.0);
        let phi = PhiField::annulus_default();
        let x = [0.0, 1.5];
        // ψ(1.5) = 0.5 − 0.125, ψ'(1.5) = 0.5
        assert!((phi.log_value(&x) - 0.375).abs() < 1e-15);
        let d = phi.dlog(&m, &x);
        assert!(d[0].abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
        let fd = geometry::stencil(&m).partials(&|y: &Vec2| phi.log_value(y), &x, 2);
        assert!((fd[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn modified_ricci_examples() {
        let ou = ManifoldSpec::half_line(true);
        let v = modified_ricci(&ou, &PhiField::One, 1, &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-6);
        let a = ManifoldSpec::annulus(1.0, 2.0);
        let phi = PhiField::annulus_default();
        let v = modified_ricci(&a, &phi, 1, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((v + 1.0).abs() < 1e-5);
        assert!(matches!(modified_ricci(&a, &phi, 3, &[1.0, 0.0], &[0.0, 1.0]), Err(PhiError::InvalidExponent(3))));
    }

    #[test]
    fn conformal_form_on_annulus() {
        let a = ManifoldSpec::annulus(1.0, 2.0);
        let phi = PhiField::annulus_default();
        let inner = conformal_second_fundamental_form(&a, &phi, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(inner.abs() < 1e-12);
        let outer = conformal_second_fundamental_form(&a, &phi, &[0.0, 2.0], &[1.0, 0.0]).unwrap();
        assert!((outer - 0.5 * (-0.5f64).exp()).abs() < 1e-12);
    }
}
