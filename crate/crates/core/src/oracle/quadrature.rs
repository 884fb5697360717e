//! Gauss–Legendre rules and μ-integrals over the built-in manifolds.

use std::f64::consts::PI;

use crate::geometry::manifold::HALF_LINE_WINDOW;
use crate::geometry::{Chart, ManifoldSpec};
use crate::linalg::Vec2;

use super::OracleError;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Chebyshev-like initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    }

    /// The rule applied on `panels` equal subintervals.
    pub fn composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels).map(|p| self.integrate(a + p as f64 * h, a + (p + 1) as f64 * h, &f)).sum()
    }

    /// Nodes and weights of the composite rule, for reuse across integrands.
    pub fn composite_points(&self, a: f64, b: f64, panels: usize) -> (Vec<f64>, Vec<f64>) {
        let h = (b - a) / panels as f64;
        let mut xs = Vec::with_capacity(panels * self.nodes.len());
        let mut ws = Vec::with_capacity(xs.capacity());
        for p in 0..panels {
            let c = a + (p as f64 + 0.5) * h;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                xs.push(c + 0.5 * h * x);
                ws.push(0.5 * h * w);
            }
        }
        (xs, ws)
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * (n * (n + 1)) as f64 * x.powi(n as i32 + 1)
    } else {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, d)
}

/// Length of the half-line covered by `μ`-quadrature; the Gaussian tail
/// beyond it is below 1e-30 even against polynomial weights.
pub const MU_WINDOW: f64 = 2.0 * HALF_LINE_WINDOW;

/// Quadrature points of `M` with weights of the unnormalised measure
/// `e^V vol`. Two-dimensional built-ins are parametrised in polar form.
#[derive(Debug, Clone)]
pub struct MeasureRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl MeasureRule {
    /// `panels` Gauss panels of order 10 radially (or along the line) and
    /// `angular` trapezoid nodes around the circle.
    pub fn new(m: &ManifoldSpec, panels: usize, angular: usize) -> Result<Self, OracleError> {
        let gl = GaussLegendre::new(10);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let dens = |x: &Vec2| m.reference_density(x);
        let mut polar = |r0: f64, r1: f64, jac: &dyn Fn(f64) -> f64| {
            let (rs, rw) = gl.composite_points(r0, r1, panels);
            let dth = 2.0 * PI / angular as f64;
            for (r, w) in rs.iter().zip(&rw) {
                for j in 0..angular {
                    let th = (j as f64 + 0.5) * dth;
                    let x = [r * th.cos(), r * th.sin()];
                    points.push(x);
                    weights.push(w * dth * jac(*r) * dens(&x));
                }
            }
        };
        match &m.chart {
            Chart::Interval { length, half_line } => {
                let len = if *half_line { MU_WINDOW } else { *length };
                let (xs, ws) = gl.composite_points(0.0, len, panels);
                for (x, w) in xs.iter().zip(&ws) {
                    let p = [*x, 0.0];
                    points.push(p);
                    weights.push(w * dens(&p));
                }
            }
            Chart::Disk { radius } => polar(0.0, *radius, &|r| r),
            Chart::Annulus { r_in, r_out } => polar(*r_in, *r_out, &|r| r),
            Chart::Hemisphere { .. } => polar(0.0, 1.0, &|r| r),
            Chart::HemispherePolar { .. } => {
                let (ts, tw) = gl.composite_points(0.0, 0.5 * PI, panels);
                let dph = 2.0 * PI / angular as f64;
                for (t, w) in ts.iter().zip(&tw) {
                    for j in 0..angular {
                        let p = [*t, (j as f64 + 0.5) * dph];
                        points.push(p);
                        weights.push(w * dph * dens(&p));
                    }
                }
            }
            Chart::Tabulated { .. } => {
                return Err(OracleError::Unsupported("quadrature on tabulated charts".into()));
            }
        }
        Ok(Self { points, weights })
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `∫ g dμ` for the normalised `μ`.
    pub fn mean(&self, g: impl Fn(&Vec2) -> f64) -> f64 {
        let s: f64 = self.points.iter().zip(&self.weights).map(|(x, w)| w * g(x)).sum();
        s / self.total_mass()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(5);
        // Degree 9 is integrated exactly.
        let v = gl.integrate(-1.0, 2.0, |x| x.powi(9) - 3.0 * x.powi(4));
        let exact = (2f64.powi(10) - 1.0) / 10.0 - 3.0 * (2f64.powi(5) + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-11, "{v} {exact}");
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn half_gaussian_moments() {
        let m = ManifoldSpec::half_line(true);
        let q = MeasureRule::new(&m, 40, 1).unwrap();
        let ex = q.mean(|x| x[0]);
        let ex2 = q.mean(|x| x[0] * x[0]);
        assert!((ex - (2.0 / PI).sqrt()).abs() < 1e-7);
        assert!((ex2 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn hemisphere_area_in_both_charts() {
        for m in [ManifoldSpec::upper_hemisphere(1.0), ManifoldSpec::hemisphere_polar(1.0)] {
            let q = MeasureRule::new(&m, 20, 64).unwrap();
            assert!((q.total_mass() - 2.0 * PI).abs() < 1e-9, "{}", q.total_mass());
        }
    }
}
