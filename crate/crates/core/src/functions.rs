//! Named test functions used by estimators and checks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{self, manifold, Chart, ManifoldSpec};
use crate::linalg::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant {
        value: f64,
    },
    /// A chart coordinate.
    Coordinate {
        axis: usize,
    },
    /// `Σ_k c_k x^k` in the first chart coordinate.
    Poly {
        coeffs: Vec<f64>,
    },
    /// `sin²θ` for the polar angle of a hemisphere chart.
    Sin2,
    /// `offset + amp · cos(mode · ϑ)` for the planar angle `ϑ` around the origin.
    CosMode {
        mode: u32,
        amp: f64,
        offset: f64,
    },
    /// `offset + slope · x` in the first chart coordinate.
    Affine {
        offset: f64,
        slope: f64,
    },
}

impl TestFunction {
    pub fn name(&self) -> String {
        match self {
            TestFunction::Constant { value } => format!("const({value})"),
            TestFunction::Coordinate { axis } => format!("x{axis}"),
            TestFunction::Poly { coeffs } => {
                let c: Vec<String> = coeffs.iter().map(|c| c.to_string()).collect();
                format!("poly({})", c.join(","))
            }
            TestFunction::Sin2 => "sin2".into(),
            TestFunction::CosMode { mode, amp, offset } => format!("{offset}+{amp}cos({mode}th)"),
            TestFunction::Affine { offset, slope } => format!("{offset}+{slope}x"),
        }
    }

    /// Evaluates the function in the chart of `m`.
    #[inline]
    pub fn eval(&self, m: &ManifoldSpec, x: &Vec2) -> f64 {
        match self {
            TestFunction::Constant { value } => *value,
            TestFunction::Coordinate { axis } => x[*axis],
            TestFunction::Poly { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x[0] + c),
            TestFunction::Sin2 => match m.chart {
                Chart::HemispherePolar { .. } => x[0].sin().powi(2),
                _ => {
                    let r2 = x[0] * x[0] + x[1] * x[1];
                    4.0 * r2 / ((1.0 + r2) * (1.0 + r2))
                }
            },
            TestFunction::CosMode { mode, amp, offset } => {
                let th = x[1].atan2(x[0]);
                offset + amp * (*mode as f64 * th).cos()
            }
            TestFunction::Affine { offset, slope } => offset + slope * x[0],
        }
    }

    pub fn field<'a>(&'a self, m: &'a ManifoldSpec) -> impl Fn(&Vec2) -> f64 + 'a {
        move |x: &Vec2| self.eval(m, x)
    }

    /// `|∇f|_g`, closed form where cheap, finite differences otherwise.
    pub fn grad_norm(&self, m: &ManifoldSpec, x: &Vec2) -> f64 {
        match self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::CosMode { mode, amp, .. } if m.is_flat_chart() => {
                let r = x[0].hypot(x[1]);
                let th = x[1].atan2(x[0]);
                (amp * *mode as f64 * (*mode as f64 * th).sin() / r).abs()
            }
            TestFunction::Coordinate { axis } if m.is_flat_chart() => (*axis < m.dim()) as u8 as f64,
            TestFunction::Affine { slope, .. } if m.is_flat_chart() => slope.abs(),
            TestFunction::Poly { coeffs } if m.is_flat_chart() => {
                let d = coeffs.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, c)| acc * x[0] + k as f64 * c);
                d.abs()
            }
            TestFunction::Sin2 if matches!(m.chart, Chart::Hemisphere { .. }) => {
                // |d sin²θ/dθ| / R
                let th = manifold::stereo_polar_angle(x);
                let radius = match m.chart {
                    Chart::Hemisphere { radius } => radius,
                    _ => 1.0,
                };
                (2.0 * th).sin().abs() / radius
            }
            _ => geometry::gradient_norm(m, &self.field(m), x),
        }
    }

    /// Smallest value over `M` is positive (needed by `log f`).
    pub fn is_positive_on(&self, m: &ManifoldSpec) -> bool {
        m.grid_points(41).iter().all(|p| self.eval(m, p) > 0.0)
    }
}

/// Polar angle `θ` of a point of the hemisphere charts.
pub fn polar_angle(m: &ManifoldSpec, x: &Vec2) -> f64 {
    match m.chart {
        Chart::HemispherePolar { .. } => x[0],
        _ => manifold::stereo_polar_angle(x),
    }
}

/// Second Legendre polynomial.
pub fn legendre2(c: f64) -> f64 {
    1.5 * c * c - 0.5
}

/// Planar angle in `[0, 2π)`.
pub fn planar_angle(x: &Vec2) -> f64 {
    x[1].atan2(x[0]).rem_euclid(2.0 * PI)
}
