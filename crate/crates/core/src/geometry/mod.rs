//! Numeric differential geometry on a single chart.
//!
//! Every tangent vector is a chart-coordinate vector and every inner product
//! goes through the metric explicitly. Derivatives are finite differences
//! with step `h_geo` (see [`fd`]).

pub mod distance;
pub mod fd;
pub mod grid;
pub mod manifold;

use thiserror::Error;

use crate::linalg::{self, Mat2, Vec2, ZERO2};

pub use fd::Stencil;
pub use grid::MetricGrid;
pub use manifold::{Catalog, Chart, ChartBox, Christoffel, GridBoundary, ManifoldSpec, Potential};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {point:?} lies outside the chart box")]
    OutsideChart { point: Vec2 },
    #[error("metric is not positive definite at {point:?}")]
    NonSpdMetric { point: Vec2 },
    #[error("point {point:?} is not on the boundary (b = {b:e})")]
    NotOnBoundary { point: Vec2, b: f64 },
    #[error("boundary gradient degenerates at {point:?} (|∇b| = {norm:e})")]
    DegenerateBoundary { point: Vec2, norm: f64 },
    #[error("metric grid: {0}")]
    Grid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Smallest admissible `|∇b|_g` on the boundary.
pub const MIN_BOUNDARY_GRADIENT: f64 = 1e-8;

pub fn stencil(m: &ManifoldSpec) -> Stencil {
    Stencil { h: m.h_geo, domain: m.domain() }
}

fn check_point(m: &ManifoldSpec, x: &Vec2) -> Result<(), GeometryError> {
    m.checked_metric(x).map(|_| ())
}

fn inverse_metric(m: &ManifoldSpec, x: &Vec2) -> Mat2 {
    linalg::inverse(&m.metric(x), m.dim()).unwrap_or(linalg::IDENTITY2)
}

/// `Γ^k_{ij}` from central differences of the metric.
pub fn christoffel(m: &ManifoldSpec, x: &Vec2) -> Result<Christoffel, GeometryError> {
    check_point(m, x)?;
    Ok(christoffel_fd(m, x))
}

pub(crate) fn christoffel_fd(m: &ManifoldSpec, x: &Vec2) -> Christoffel {
    let dim = m.dim();
    let mut gam = [[[0.0; 2]; 2]; 2];
    if m.is_flat_chart() {
        return gam;
    }
    let st = stencil(m);
    let dg = st.partials(&|y: &Vec2| m.metric(y), x, dim);
    let ginv = inverse_metric(m, x);
    for k in 0..dim {
        for i in 0..dim {
            for j in i..dim {
                let mut v = 0.0;
                for l in 0..dim {
                    v += 0.5 * ginv[k][l] * (dg[i][j][l] + dg[j][i][l] - dg[l][i][j]);
                }
                gam[k][i][j] = v;
                gam[k][j][i] = v;
            }
        }
    }
    gam
}

/// Christoffels for the hot paths: closed form when the chart has one.
#[inline]
pub(crate) fn christoffel_fast(m: &ManifoldSpec, x: &Vec2) -> Christoffel {
    m.christoffel_exact(x).unwrap_or_else(|| christoffel_fd(m, x))
}

/// Chart components `∇f^i = g^{ij} ∂_j f`.
pub fn gradient(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> Result<Vec2, GeometryError> {
    check_point(m, x)?;
    Ok(gradient_raw(m, f, x))
}

pub(crate) fn gradient_raw(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> Vec2 {
    let dim = m.dim();
    let df = stencil(m).partials(f, x, dim);
    linalg::mat_vec(&inverse_metric(m, x), &df, dim)
}

/// `|∇f|_g` at `x`.
pub fn gradient_norm(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> f64 {
    let dim = m.dim();
    let df = stencil(m).partials(f, x, dim);
    linalg::norm_g(&inverse_metric(m, x), &df, dim)
}

/// `Hess_ij = ∂_i∂_j f − Γ^k_{ij} ∂_k f`.
pub fn hessian(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> Result<Mat2, GeometryError> {
    check_point(m, x)?;
    Ok(hessian_raw(m, f, x))
}

pub(crate) fn hessian_raw(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> Mat2 {
    let dim = m.dim();
    let st = stencil(m);
    let df = st.partials(f, x, dim);
    let gam = christoffel_fd(m, x);
    let mut h = [[0.0; 2]; 2];
    for i in 0..dim {
        for j in i..dim {
            let mut v = st.d2(f, x, i, j);
            for k in 0..dim {
                v -= gam[k][i][j] * df[k];
            }
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

/// `Lf = tr(g^{-1} Hess f) + Z·∇f`.
pub fn generator_l(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> Result<f64, GeometryError> {
    check_point(m, x)?;
    Ok(generator_raw(m, f, x))
}

pub(crate) fn generator_raw(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> f64 {
    let dim = m.dim();
    let h = hessian_raw(m, f, x);
    let ginv = inverse_metric(m, x);
    let mut v = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            v += ginv[i][j] * h[i][j];
        }
    }
    if m.has_drift() {
        let df = stencil(m).partials(f, x, dim);
        let z = m.drift(x);
        v += (0..dim).map(|k| z[k] * df[k]).sum::<f64>();
    }
    v
}

/// Ricci tensor `R_ij` in chart components.
pub fn ricci_tensor(m: &ManifoldSpec, x: &Vec2) -> Result<Mat2, GeometryError> {
    check_point(m, x)?;
    Ok(ricci_raw(m, x))
}

pub(crate) fn ricci_raw(m: &ManifoldSpec, x: &Vec2) -> Mat2 {
    let dim = m.dim();
    let mut r = [[0.0; 2]; 2];
    if dim == 1 || m.is_flat_chart() {
        return r;
    }
    let st = stencil(m);
    let gam = christoffel_fd(m, x);
    let dgam = st.partials(&|y: &Vec2| christoffel_fd(m, y), x, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut v = 0.0;
            for k in 0..dim {
                v += dgam[k][k][i][j] - dgam[j][k][i][k];
                for l in 0..dim {
                    v += gam[k][k][l] * gam[l][i][j] - gam[k][j][l] * gam[l][i][k];
                }
            }
            r[i][j] = v;
        }
    }
    // Symmetrise away round-off.
    let s = 0.5 * (r[0][1] + r[1][0]);
    r[0][1] = s;
    r[1][0] = s;
    r
}

/// `Ric(X, X)`.
pub fn ricci(m: &ManifoldSpec, x: &Vec2, v: &Vec2) -> Result<f64, GeometryError> {
    let r = ricci_tensor(m, x)?;
    Ok(linalg::form(&r, v, v, m.dim()))
}

/// Symmetric part of `(X, Y) ↦ ⟨∇_X Z, Y⟩`.
pub fn drift_covariant(m: &ManifoldSpec, x: &Vec2) -> Mat2 {
    let dim = m.dim();
    let mut out = [[0.0; 2]; 2];
    if !m.has_drift() {
        return out;
    }
    let st = stencil(m);
    let dz = st.partials(&|y: &Vec2| m.drift(y), x, dim);
    let z = m.drift(x);
    let gam = christoffel_fd(m, x);
    let g = m.metric(x);
    // a[i][k] = (∇_{e_i} Z)^k
    let mut a = [[0.0; 2]; 2];
    for i in 0..dim {
        for k in 0..dim {
            a[i][k] = dz[i][k] + (0..dim).map(|l| gam[k][i][l] * z[l]).sum::<f64>();
        }
    }
    let mut raw = [[0.0; 2]; 2];
    for i in 0..dim {
        for j in 0..dim {
            raw[i][j] = (0..dim).map(|k| g[j][k] * a[i][k]).sum();
        }
    }
    for i in 0..dim {
        for j in 0..dim {
            out[i][j] = 0.5 * (raw[i][j] + raw[j][i]);
        }
    }
    out
}

/// The Bakry–Émery tensor `Ric − ∇Z`.
pub fn bakry_emery(m: &ManifoldSpec, x: &Vec2) -> Result<Mat2, GeometryError> {
    let r = ricci_tensor(m, x)?;
    let dz = drift_covariant(m, x);
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = r[i][j] - dz[i][j];
        }
    }
    Ok(out)
}

/// `∇b` in chart components and its `g`-norm.
fn boundary_gradient(m: &ManifoldSpec, x: &Vec2) -> (Vec2, f64) {
    let dim = m.dim();
    let g = m.metric(x);
    let grad = gradient_raw(m, &|y: &Vec2| m.boundary_fn(y), x);
    let n = linalg::norm_g(&g, &grad, dim);
    (grad, n)
}

/// The extended normal field `∇b/|∇b|_g`, defined near `∂M`.
pub(crate) fn normal_field(m: &ManifoldSpec, x: &Vec2) -> Vec2 {
    let (grad, n) = boundary_gradient(m, x);
    if n > 0.0 {
        linalg::scale(&grad, 1.0 / n)
    } else {
        ZERO2
    }
}

fn check_boundary(m: &ManifoldSpec, x: &Vec2) -> Result<(), GeometryError> {
    check_point(m, x)?;
    let b = m.boundary_fn(x);
    if b.abs() > m.boundary_tolerance() {
        return Err(GeometryError::NotOnBoundary { point: *x, b });
    }
    let (_, n) = boundary_gradient(m, x);
    if n < MIN_BOUNDARY_GRADIENT {
        return Err(GeometryError::DegenerateBoundary { point: *x, norm: n });
    }
    Ok(())
}

/// Inward unit normal `N = ∇b/|∇b|_g` at a boundary point.
pub fn inward_normal(m: &ManifoldSpec, x: &Vec2) -> Result<Vec2, GeometryError> {
    check_boundary(m, x)?;
    Ok(normal_field(m, x))
}

/// Projects `v` onto `T_x∂M` and rescales to its original `g`-length. The
/// second value is the relative change made by the projection.
pub fn tangential_projection(m: &ManifoldSpec, x: &Vec2, v: &Vec2) -> (Vec2, f64) {
    let dim = m.dim();
    if dim == 1 {
        return (ZERO2, if linalg::euclid(v, 1) > 0.0 { 1.0 } else { 0.0 });
    }
    let g = m.metric(x);
    let n = normal_field(m, x);
    let len = linalg::norm_g(&g, v, dim);
    if len == 0.0 {
        return (ZERO2, 0.0);
    }
    let p = linalg::sub(v, &linalg::scale(&n, linalg::form(&g, v, &n, dim)));
    let plen = linalg::norm_g(&g, &p, dim);
    if plen == 0.0 {
        return (ZERO2, 1.0);
    }
    let out = linalg::scale(&p, len / plen);
    let change = linalg::norm_g(&g, &linalg::sub(&out, v), dim) / len;
    (out, change)
}

/// The `g`-unit vector tangent to `∂M` at `x` (2-D only).
pub fn unit_tangent(m: &ManifoldSpec, x: &Vec2) -> Result<Vec2, GeometryError> {
    if m.dim() == 1 {
        return Err(GeometryError::Unsupported("the boundary of a 1-D manifold has no tangent space".into()));
    }
    let n = inward_normal(m, x)?;
    let g = m.metric(x);
    // Rotate the covector g·n by 90°, which is g-orthogonal to n.
    let gn = linalg::mat_vec(&g, &n, 2);
    let t = [-gn[1], gn[0]];
    Ok(linalg::scale(&t, 1.0 / linalg::norm_g(&g, &t, 2)))
}

/// `II(X, Y) = −⟨∇_X N, Y⟩` with `X`, `Y` projected onto `T_x∂M`.
pub fn second_fundamental_form(m: &ManifoldSpec, x: &Vec2, v: &Vec2, w: &Vec2) -> Result<f64, GeometryError> {
    check_boundary(m, x)?;
    if m.dim() == 1 {
        return Ok(0.0);
    }
    let (v, _) = tangential_projection(m, x, v);
    let (w, _) = tangential_projection(m, x, w);
    Ok(second_fundamental_form_raw(m, x, &v, &w))
}

pub(crate) fn second_fundamental_form_raw(m: &ManifoldSpec, x: &Vec2, v: &Vec2, w: &Vec2) -> f64 {
    let dim = m.dim();
    let st = stencil(m);
    let dn = st.partials(&|y: &Vec2| normal_field(m, y), x, dim);
    let n = normal_field(m, x);
    let gam = christoffel_fd(m, x);
    let mut cov = ZERO2;
    for (k, slot) in cov.iter_mut().enumerate().take(dim) {
        for i in 0..dim {
            let mut d = dn[i][k];
            for l in 0..dim {
                d += gam[k][i][l] * n[l];
            }
            *slot += v[i] * d;
        }
    }
    -linalg::form(&m.metric(x), &cov, w, dim)
}

/// Both sides of the Bochner identity at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gamma2 {
    /// `½ L|∇f|² − ⟨∇Lf, ∇f⟩`
    pub lhs: f64,
    /// `(Ric − ∇Z)(∇f, ∇f) + ‖Hess f‖²_HS`
    pub rhs: f64,
}

impl Gamma2 {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

pub fn gamma2_check(m: &ManifoldSpec, f: &impl Fn(&Vec2) -> f64, x: &Vec2) -> Result<Gamma2, GeometryError> {
    check_point(m, x)?;
    let dim = m.dim();
    let st = stencil(m);
    let grad_sq = |y: &Vec2| {
        let df = st.partials(f, y, dim);
        linalg::form(&inverse_metric(m, y), &df, &df, dim)
    };
    let lf = |y: &Vec2| generator_raw(m, f, y);
    let df = st.partials(f, x, dim);
    let dlf = st.partials(&lf, x, dim);
    let ginv = inverse_metric(m, x);
    let lhs = 0.5 * generator_raw(m, &grad_sq, x) - linalg::form(&ginv, &dlf, &df, dim);

    let grad = linalg::mat_vec(&ginv, &df, dim);
    let be = bakry_emery(m, x)?;
    let h = hessian_raw(m, f, x);
    // ‖H‖²_HS = tr(g^{-1} H g^{-1} H)
    let a = linalg::mat_mul(&ginv, &h, dim);
    let mut hs = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            hs += a[i][j] * a[j][i];
        }
    }
    let rhs = linalg::form(&be, &grad, &grad, dim) + hs;
    Ok(Gamma2 { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn polar_hemisphere_christoffel() {
        let m = ManifoldSpec::hemisphere_polar(1.0);
        let gam = christoffel(&m, &[FRAC_PI_4, 0.3]).unwrap();
        assert!((gam[0][1][1] + 0.5).abs() < 1e-6);
        assert!((gam[1][0][1] - 1.0).abs() < 1e-6);
        let exact = m.christoffel_exact(&[FRAC_PI_4, 0.3]).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((gam[k][i][j] - exact[k][i][j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn stereographic_christoffel_matches_closed_form() {
        let m = ManifoldSpec::upper_hemisphere(1.0);
        let x = [0.3, -0.2];
        let fd = christoffel(&m, &x).unwrap();
        let exact = m.christoffel_exact(&x).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((fd[k][i][j] - exact[k][i][j]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn flat_disk_linear_function() {
        let m = ManifoldSpec::disk(1.0);
        let f = |x: &Vec2| x[0];
        let x = [0.2, 0.1];
        let g = gradient(&m, &f, &x).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-10 && g[1].abs() < 1e-10);
        assert!(generator_l(&m, &f, &x).unwrap().abs() < 1e-6);
    }

    #[test]
    fn ou_generator_cancels() {
        let m = ManifoldSpec::half_line(true);
        let f = |x: &Vec2| x[0] * x[0];
        assert!(generator_l(&m, &f, &[1.0, 0.0]).unwrap().abs() < 1e-6);
    }

    #[test]
    fn sphere_laplacian_of_sin_squared() {
        let m = ManifoldSpec::hemisphere_polar(1.0);
        let f = |x: &Vec2| x[0].sin().powi(2);
        let th = 0.7;
        let lf = generator_l(&m, &f, &[th, 1.0]).unwrap();
        assert!((lf - (6.0 * th.cos().powi(2) - 2.0)).abs() < 1e-5);
    }

    #[test]
    fn ricci_on_spheres() {
        for (r, k) in [(1.0, 1.0), (2.0, 0.25)] {
            let m = ManifoldSpec::upper_hemisphere(r);
            let x = [0.4, 0.1];
            let g = m.metric(&x);
            let v = [1.0 / g[0][0].sqrt(), 0.0];
            assert!((ricci(&m, &x, &v).unwrap() - k).abs() < 1e-3 * k);
        }
    }

    #[test]
    fn normals_and_second_fundamental_forms() {
        let d = ManifoldSpec::disk(2.0);
        let p = [0.0, 2.0];
        let n = inward_normal(&d, &p).unwrap();
        assert!((n[1] + 1.0).abs() < 1e-8);
        let t = unit_tangent(&d, &p).unwrap();
        assert!((second_fundamental_form(&d, &p, &t, &t).unwrap() - 0.5).abs() < 1e-6);

        let a = ManifoldSpec::annulus(1.0, 2.0);
        let p = [1.0, 0.0];
        let n = inward_normal(&a, &p).unwrap();
        assert!((n[0] - 1.0).abs() < 1e-8);
        let t = unit_tangent(&a, &p).unwrap();
        assert!((second_fundamental_form(&a, &p, &t, &t).unwrap() + 1.0).abs() < 1e-5);

        let h = ManifoldSpec::half_line(false);
        assert!((inward_normal(&h, &[0.0, 0.0]).unwrap()[0] - 1.0).abs() < 1e-8);
        assert!(matches!(inward_normal(&h, &[0.5, 0.0]), Err(GeometryError::NotOnBoundary { .. })));
    }

    #[test]
    fn bochner_on_ou_and_disk() {
        let ou = ManifoldSpec::half_line(true);
        let g = gamma2_check(&ou, &|x: &Vec2| x[0], &[1.3, 0.0]).unwrap();
        assert!((g.lhs - 1.0).abs() < 1e-5 && (g.rhs - 1.0).abs() < 1e-6);
        let d = ManifoldSpec::disk(1.0);
        let g = gamma2_check(&d, &|x: &Vec2| x[0] * x[0], &[0.3, 0.2]).unwrap();
        assert!((g.lhs - 4.0).abs() < 1e-4 && (g.rhs - 4.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_points_outside_chart() {
        let d = ManifoldSpec::disk(1.0);
        assert!(matches!(christoffel(&d, &[5.0, 0.0]), Err(GeometryError::OutsideChart { .. })));
    }
}
