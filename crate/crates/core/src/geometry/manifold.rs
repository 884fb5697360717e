//! Chart data for manifolds with boundary, and the built-in catalog.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use crate::linalg::{self, Mat2, Vec2, IDENTITY2, ZERO2};

use super::distance;
use super::grid::MetricGrid;
use super::GeometryError;

/// Axis-aligned coordinate box with per-axis periodicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartBox {
    pub lo: Vec2,
    pub hi: Vec2,
    pub periodic: [bool; 2],
}

impl ChartBox {
    pub fn contains(&self, x: &Vec2, dim: usize) -> bool {
        (0..dim).all(|i| self.periodic[i] || (x[i] >= self.lo[i] && x[i] <= self.hi[i]))
    }

    pub fn diameter(&self, dim: usize) -> f64 {
        let d = linalg::sub(&self.hi, &self.lo);
        linalg::euclid(&[d[0], if dim == 2 { d[1] } else { 0.0 }], 2)
    }

    /// Wraps periodic coordinates back into `[lo, hi)`.
    pub fn wrap(&self, x: &mut Vec2, dim: usize) {
        for i in 0..dim {
            if self.periodic[i] {
                let w = self.hi[i] - self.lo[i];
                x[i] = self.lo[i] + (x[i] - self.lo[i]).rem_euclid(w);
            }
        }
    }
}

/// Boundary description for tabulated charts.
#[derive(Debug, Clone, PartialEq)]
pub enum GridBoundary {
    /// 1-D: the grid interval itself.
    Interval,
    /// 2-D: a closed disk in chart coordinates.
    Disk { center: Vec2, radius: f64 },
    /// 2-D: the strip `lo ≤ y ≤ hi`.
    Slab { lo: f64, hi: f64 },
}

/// The coordinate chart of a manifold with boundary.
#[derive(Debug, Clone)]
pub enum Chart {
    /// `[0, length]`. `half_line` marks a truncated half-line whose far end
    /// is an artificial reflecting wall.
    Interval {
        length: f64,
        half_line: bool,
    },
    Disk {
        radius: f64,
    },
    Annulus {
        r_in: f64,
        r_out: f64,
    },
    /// Upper hemisphere in the stereographic chart from the south pole: the
    /// unit chart disk is the closed hemisphere, `g = (2R/(1+|x|²))² δ`.
    Hemisphere {
        radius: f64,
    },
    /// Upper hemisphere in polar coordinates `(θ, ϕ)`, `ϕ` periodic. The pole
    /// is excluded from the chart box.
    HemispherePolar {
        radius: f64,
    },
    Tabulated {
        grid: Arc<MetricGrid>,
        boundary: GridBoundary,
    },
}

/// Reference potential `V`, with `μ(dx) = e^V dx` and gradient drift `∇V`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Potential {
    #[default]
    None,
    /// `V(x) = −k |x|² / 2` in chart coordinates.
    Quadratic { k: f64 },
}

impl Potential {
    #[inline]
    pub fn value(&self, x: &Vec2, dim: usize) -> f64 {
        match self {
            Potential::None => 0.0,
            Potential::Quadratic { k } => {
                let r2 = x[0] * x[0] + if dim == 2 { x[1] * x[1] } else { 0.0 };
                -0.5 * k * r2
            }
        }
    }

    /// Chart partials `∂_i V`.
    #[inline]
    pub fn differential(&self, x: &Vec2, dim: usize) -> Vec2 {
        match self {
            Potential::None => ZERO2,
            Potential::Quadratic { k } => [-k * x[0], if dim == 2 { -k * x[1] } else { 0.0 }],
        }
    }
}

/// A manifold with boundary given on one chart, together with the drift
/// `Z = ∇V + A x` of the generator `L = Δ + Z`.
#[derive(Debug, Clone)]
pub struct ManifoldSpec {
    pub chart: Chart,
    pub potential: Potential,
    /// Optional linear drift `A x` (chart components) added to `∇V`.
    pub linear_drift: Option<Mat2>,
    /// Finite-difference step for all differential quantities.
    pub h_geo: f64,
}

pub const DEFAULT_H_GEO: f64 = 1e-3;
/// Window of the simulated half-line.
pub const HALF_LINE_WINDOW: f64 = 6.0;

impl ManifoldSpec {
    pub fn new(chart: Chart) -> Self {
        Self { chart, potential: Potential::None, linear_drift: None, h_geo: DEFAULT_H_GEO }
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_linear_drift(mut self, a: Mat2) -> Self {
        self.linear_drift = Some(a);
        self
    }

    // Built-in catalog.

    /// `[0, ∞)` simulated on the window `[0, 6]`, optionally with `V = −x²/2` (OU drift).
    pub fn half_line(ou: bool) -> Self {
        let m = Self::new(Chart::Interval { length: HALF_LINE_WINDOW, half_line: true });
        if ou {
            m.with_potential(Potential::Quadratic { k: 1.0 })
        } else {
            m
        }
    }

    pub fn interval(length: f64) -> Self {
        Self::new(Chart::Interval { length, half_line: false })
    }

    pub fn disk(radius: f64) -> Self {
        Self::new(Chart::Disk { radius })
    }

    pub fn annulus(r_in: f64, r_out: f64) -> Self {
        Self::new(Chart::Annulus { r_in, r_out })
    }

    pub fn upper_hemisphere(radius: f64) -> Self {
        Self::new(Chart::Hemisphere { radius })
    }

    pub fn hemisphere_polar(radius: f64) -> Self {
        Self::new(Chart::HemispherePolar { radius })
    }

    pub fn tabulated(grid: MetricGrid, boundary: GridBoundary) -> Result<Self, GeometryError> {
        match (grid.dim, &boundary) {
            (1, GridBoundary::Interval) | (2, GridBoundary::Disk { .. }) | (2, GridBoundary::Slab { .. }) => {}
            _ => return Err(GeometryError::Unsupported(format!("boundary {boundary:?} does not fit a {}-D grid", grid.dim))),
        }
        Ok(Self::new(Chart::Tabulated { grid: Arc::new(grid), boundary }))
    }

    pub fn name(&self) -> &'static str {
        match &self.chart {
            Chart::Interval { half_line: true, .. } => "half_line",
            Chart::Interval { .. } => "interval",
            Chart::Disk { .. } => "disk",
            Chart::Annulus { .. } => "annulus",
            Chart::Hemisphere { .. } => "upper_hemisphere",
            Chart::HemispherePolar { .. } => "hemisphere_polar",
            Chart::Tabulated { .. } => "tabulated",
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        match &self.chart {
            Chart::Interval { .. } => 1,
            Chart::Tabulated { grid, .. } => grid.dim,
            _ => 2,
        }
    }

    /// Constant identity metric in the chart.
    #[inline]
    pub fn is_flat_chart(&self) -> bool {
        matches!(self.chart, Chart::Interval { .. } | Chart::Disk { .. } | Chart::Annulus { .. })
    }

    pub fn domain(&self) -> ChartBox {
        let np = [false, false];
        match &self.chart {
            Chart::Interval { length, .. } => {
                let pad = 0.1 * length;
                ChartBox { lo: [-pad, 0.0], hi: [length + pad, 0.0], periodic: np }
            }
            Chart::Disk { radius } => ChartBox { lo: [-1.25 * radius; 2], hi: [1.25 * radius; 2], periodic: np },
            Chart::Annulus { r_out, .. } => ChartBox { lo: [-1.25 * r_out; 2], hi: [1.25 * r_out; 2], periodic: np },
            Chart::Hemisphere { .. } => ChartBox { lo: [-1.5; 2], hi: [1.5; 2], periodic: np },
            Chart::HemispherePolar { .. } => ChartBox { lo: [0.02, 0.0], hi: [FRAC_PI_2 + 0.3, 2.0 * PI], periodic: [false, true] },
            Chart::Tabulated { grid, .. } => {
                ChartBox { lo: [grid.x_range.0, grid.y_range.0], hi: [grid.x_range.1, grid.y_range.1], periodic: np }
            }
        }
    }

    #[inline]
    pub fn metric(&self, x: &Vec2) -> Mat2 {
        match &self.chart {
            Chart::Interval { .. } | Chart::Disk { .. } | Chart::Annulus { .. } => IDENTITY2,
            Chart::Hemisphere { radius } => {
                let l = stereo_scale(*radius, x);
                let l2 = l * l;
                [[l2, 0.0], [0.0, l2]]
            }
            Chart::HemispherePolar { radius } => {
                let r2 = radius * radius;
                let s = x[0].sin();
                [[r2, 0.0], [0.0, r2 * s * s]]
            }
            Chart::Tabulated { grid, .. } => grid.metric(x),
        }
    }

    pub fn checked_metric(&self, x: &Vec2) -> Result<Mat2, GeometryError> {
        if !self.domain().contains(x, self.dim()) {
            return Err(GeometryError::OutsideChart { point: *x });
        }
        let g = self.metric(x);
        if !linalg::is_spd(&g, self.dim()) {
            return Err(GeometryError::NonSpdMetric { point: *x });
        }
        Ok(g)
    }

    /// `b` with `M = {b ≥ 0}` and `∂M = {b = 0}`.
    #[inline]
    pub fn boundary_fn(&self, x: &Vec2) -> f64 {
        match &self.chart {
            Chart::Interval { length, .. } => x[0] * (length - x[0]) / length,
            Chart::Disk { radius } => (radius * radius - x[0] * x[0] - x[1] * x[1]) / (2.0 * radius),
            Chart::Annulus { r_in, r_out } => {
                let r = x[0].hypot(x[1]);
                (r - r_in) * (r_out - r) / (r_out - r_in)
            }
            Chart::Hemisphere { .. } => 0.5 * (1.0 - x[0] * x[0] - x[1] * x[1]),
            Chart::HemispherePolar { .. } => FRAC_PI_2 - x[0],
            Chart::Tabulated { boundary, grid } => match boundary {
                GridBoundary::Interval => {
                    let (a, b) = grid.x_range;
                    (x[0] - a) * (b - x[0]) / (b - a)
                }
                GridBoundary::Disk { center, radius } => {
                    let d = linalg::sub(x, center);
                    (radius * radius - d[0] * d[0] - d[1] * d[1]) / (2.0 * radius)
                }
                GridBoundary::Slab { lo, hi } => (x[1] - lo) * (hi - x[1]) / (hi - lo),
            },
        }
    }

    #[inline]
    pub fn contains(&self, x: &Vec2) -> bool {
        self.boundary_fn(x) >= 0.0
    }

    /// Tolerance for boundary membership.
    pub fn boundary_tolerance(&self) -> f64 {
        1e-9 * self.domain().diameter(self.dim())
    }

    /// Drift `Z = g^{-1} dV + A x` in chart components.
    #[inline]
    pub fn drift(&self, x: &Vec2) -> Vec2 {
        let dim = self.dim();
        let mut z = match self.potential {
            Potential::None => ZERO2,
            p => {
                let dv = p.differential(x, dim);
                if self.is_flat_chart() {
                    dv
                } else {
                    let ginv = linalg::inverse(&self.metric(x), dim).unwrap_or(IDENTITY2);
                    linalg::mat_vec(&ginv, &dv, dim)
                }
            }
        };
        if let Some(a) = &self.linear_drift {
            let ax = linalg::mat_vec(a, x, dim);
            z = linalg::add(&z, &ax);
        }
        if dim == 1 {
            z[1] = 0.0;
        }
        z
    }

    pub fn has_drift(&self) -> bool {
        self.potential != Potential::None || self.linear_drift.is_some()
    }

    /// Volume density times `e^V` (unnormalised density of `μ` in the chart).
    pub fn reference_density(&self, x: &Vec2) -> f64 {
        let dim = self.dim();
        linalg::det(&self.metric(x), dim).sqrt() * self.potential.value(x, dim).exp()
    }

    /// Closed-form Christoffel symbols `Γ[k][i][j]` where available.
    #[inline]
    pub fn christoffel_exact(&self, x: &Vec2) -> Option<Christoffel> {
        match &self.chart {
            Chart::Interval { .. } | Chart::Disk { .. } | Chart::Annulus { .. } => Some([[[0.0; 2]; 2]; 2]),
            Chart::Hemisphere { .. } => {
                // g = e^{2w} δ with w = log(2R/(1+r²)).
                let s = 1.0 + x[0] * x[0] + x[1] * x[1];
                let dw = [-2.0 * x[0] / s, -2.0 * x[1] / s];
                let mut gam = [[[0.0; 2]; 2]; 2];
                for k in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            let mut v = 0.0;
                            if i == k {
                                v += dw[j];
                            }
                            if j == k {
                                v += dw[i];
                            }
                            if i == j {
                                v -= dw[k];
                            }
                            gam[k][i][j] = v;
                        }
                    }
                }
                Some(gam)
            }
            Chart::HemispherePolar { .. } => {
                let (s, c) = x[0].sin_cos();
                let mut gam = [[[0.0; 2]; 2]; 2];
                gam[0][1][1] = -s * c;
                gam[1][0][1] = c / s;
                gam[1][1][0] = c / s;
                Some(gam)
            }
            Chart::Tabulated { .. } => None,
        }
    }

    /// Projects a point that left `M` back onto `∂M` along the normal
    /// direction. Returns the boundary point and the Riemannian length of
    /// the correction.
    pub fn project_to_boundary(&self, y: &Vec2) -> (Vec2, f64) {
        match &self.chart {
            Chart::Interval { length, .. } => {
                if y[0] < 0.0 {
                    ([0.0, 0.0], -y[0])
                } else {
                    ([*length, 0.0], y[0] - length)
                }
            }
            Chart::Disk { radius } => {
                let r = y[0].hypot(y[1]);
                (linalg::scale(y, radius / r), r - radius)
            }
            Chart::Annulus { r_in, r_out } => {
                let r = y[0].hypot(y[1]);
                if r < *r_in {
                    if r == 0.0 {
                        return ([*r_in, 0.0], *r_in);
                    }
                    (linalg::scale(y, r_in / r), r_in - r)
                } else {
                    (linalg::scale(y, r_out / r), r - r_out)
                }
            }
            Chart::Hemisphere { radius } => {
                let r = y[0].hypot(y[1]);
                (linalg::scale(y, 1.0 / r), 2.0 * radius * (r.atan() - std::f64::consts::FRAC_PI_4))
            }
            Chart::HemispherePolar { radius } => ([FRAC_PI_2, y[1]], radius * (y[0] - FRAC_PI_2)),
            Chart::Tabulated { .. } => self.newton_projection(y),
        }
    }

    /// Generic projection: Newton iteration on `s ↦ b(y + s N(y))`.
    fn newton_projection(&self, y: &Vec2) -> (Vec2, f64) {
        let dim = self.dim();
        let h = self.h_geo;
        let mut p = *y;
        let mut travelled = 0.0;
        for _ in 0..20 {
            let b = self.boundary_fn(&p);
            if b.abs() <= self.boundary_tolerance() {
                break;
            }
            let g = self.metric(&p);
            let ginv = linalg::inverse(&g, dim).unwrap_or(IDENTITY2);
            let mut db = ZERO2;
            for (i, slot) in db.iter_mut().enumerate().take(dim) {
                let mut e = ZERO2;
                e[i] = h;
                *slot = (self.boundary_fn(&linalg::add(&p, &e)) - self.boundary_fn(&linalg::sub(&p, &e))) / (2.0 * h);
            }
            let grad = linalg::mat_vec(&ginv, &db, dim);
            let gn = linalg::norm_g(&g, &grad, dim);
            if gn < 1e-12 {
                break;
            }
            let n = linalg::scale(&grad, 1.0 / gn);
            // d/ds b(p + s n) = <db, n> = |∇b|_g.
            let s = -b / gn;
            p = linalg::add(&p, &linalg::scale(&n, s));
            travelled += s.abs();
        }
        (p, travelled)
    }

    /// Riemannian distance.
    pub fn distance(&self, x: &Vec2, y: &Vec2) -> f64 {
        match &self.chart {
            Chart::Interval { .. } => (x[0] - y[0]).abs(),
            Chart::Disk { .. } => (x[0] - y[0]).hypot(x[1] - y[1]),
            Chart::Annulus { r_in, .. } => distance::annulus(*r_in, x, y),
            Chart::Hemisphere { radius } => distance::great_circle(*radius, &stereo_to_sphere(x), &stereo_to_sphere(y)),
            Chart::HemispherePolar { radius } => distance::great_circle(*radius, &polar_to_sphere(x), &polar_to_sphere(y)),
            Chart::Tabulated { .. } => distance::graph_distance(self, x, y),
        }
    }

    /// Base point `o` of `ρ_o`.
    pub fn base_point(&self) -> Vec2 {
        match &self.chart {
            Chart::Interval { .. } | Chart::Disk { .. } | Chart::Hemisphere { .. } => ZERO2,
            Chart::Annulus { r_in, r_out } => [0.5 * (r_in + r_out), 0.0],
            Chart::HemispherePolar { .. } => [0.25 * PI, 0.0],
            Chart::Tabulated { grid, .. } => {
                let dim = grid.dim;
                let mut c = [0.5 * (grid.x_range.0 + grid.x_range.1), 0.5 * (grid.y_range.0 + grid.y_range.1)];
                if dim == 1 {
                    c[1] = 0.0;
                }
                c
            }
        }
    }

    /// Riemannian distance to `∂M` for the built-ins.
    pub fn distance_to_boundary(&self, x: &Vec2) -> Option<f64> {
        Some(match &self.chart {
            Chart::Interval { length, half_line } => {
                if *half_line {
                    x[0]
                } else {
                    x[0].min(length - x[0])
                }
            }
            Chart::Disk { radius } => radius - x[0].hypot(x[1]),
            Chart::Annulus { r_in, r_out } => {
                let r = x[0].hypot(x[1]);
                (r - r_in).min(r_out - r)
            }
            Chart::Hemisphere { radius } => {
                let r = x[0].hypot(x[1]);
                radius * (FRAC_PI_2 - 2.0 * r.atan())
            }
            Chart::HemispherePolar { radius } => radius * (FRAC_PI_2 - x[0]),
            Chart::Tabulated { .. } => return None,
        })
    }

    /// Sample points on `∂M`.
    pub fn boundary_points(&self, n: usize) -> Vec<Vec2> {
        let circle = |c: Vec2, r: f64, n: usize| -> Vec<Vec2> {
            (0..n)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / n as f64;
                    [c[0] + r * a.cos(), c[1] + r * a.sin()]
                })
                .collect()
        };
        match &self.chart {
            Chart::Interval { length, half_line } => {
                if *half_line {
                    vec![ZERO2]
                } else {
                    vec![ZERO2, [*length, 0.0]]
                }
            }
            Chart::Disk { radius } => circle(ZERO2, *radius, n),
            Chart::Annulus { r_in, r_out } => {
                let mut v = circle(ZERO2, *r_in, n);
                v.extend(circle(ZERO2, *r_out, n));
                v
            }
            Chart::Hemisphere { .. } => circle(ZERO2, 1.0, n),
            Chart::HemispherePolar { .. } => (0..n).map(|k| [FRAC_PI_2, 2.0 * PI * k as f64 / n as f64]).collect(),
            Chart::Tabulated { grid, boundary } => match boundary {
                GridBoundary::Interval => vec![[grid.x_range.0, 0.0], [grid.x_range.1, 0.0]],
                GridBoundary::Disk { center, radius } => circle(*center, *radius, n),
                GridBoundary::Slab { lo, hi } => {
                    let (a, b) = grid.x_range;
                    let inner = |k: usize| a + (b - a) * (k as f64 + 0.5) / n as f64;
                    let mut v: Vec<Vec2> = (0..n).map(|k| [inner(k), *lo]).collect();
                    v.extend((0..n).map(|k| [inner(k), *hi]));
                    v
                }
            },
        }
    }

    /// Points of a regular `n × n` grid over the chart box that lie in `M`,
    /// followed by boundary samples.
    pub fn grid_points(&self, n: usize) -> Vec<Vec2> {
        let dim = self.dim();
        let dom = self.domain();
        let mut pts = Vec::new();
        let coord = |i: usize, k: usize| -> f64 {
            if dom.periodic[i] {
                dom.lo[i] + (dom.hi[i] - dom.lo[i]) * k as f64 / n as f64
            } else {
                dom.lo[i] + (dom.hi[i] - dom.lo[i]) * k as f64 / (n - 1) as f64
            }
        };
        let ny = if dim == 2 { n } else { 1 };
        for j in 0..ny {
            for i in 0..n {
                let p = [coord(0, i), if dim == 2 { coord(1, j) } else { 0.0 }];
                if self.contains(&p) && self.in_chart_interior(&p) {
                    pts.push(p);
                }
            }
        }
        pts.extend(self.boundary_points(4 * n));
        pts
    }

    /// True when finite-difference stencils of reach `4 h_geo` around `x`
    /// stay in the chart box.
    pub fn in_chart_interior(&self, x: &Vec2) -> bool {
        let dom = self.domain();
        let pad = 4.0 * self.h_geo;
        (0..self.dim()).all(|i| dom.periodic[i] || (x[i] >= dom.lo[i] + pad && x[i] <= dom.hi[i] - pad))
    }

    /// Exact catalog data for oracle cross-checks.
    pub fn catalog(&self) -> Option<Catalog> {
        Some(match &self.chart {
            Chart::Interval { .. } | Chart::Disk { .. } | Chart::Annulus { .. } => Catalog { gauss_curvature: 0.0 },
            Chart::Hemisphere { radius } | Chart::HemispherePolar { radius } => Catalog { gauss_curvature: 1.0 / (radius * radius) },
            Chart::Tabulated { .. } => return None,
        })
    }

    /// Closed-form inward unit normal at a boundary point.
    pub fn exact_normal(&self, x: &Vec2) -> Option<Vec2> {
        Some(match &self.chart {
            Chart::Interval { length, .. } => {
                if x[0] < 0.5 * length {
                    [1.0, 0.0]
                } else {
                    [-1.0, 0.0]
                }
            }
            Chart::Disk { radius } => linalg::scale(x, -1.0 / radius),
            Chart::Annulus { r_in, r_out } => {
                let r = x[0].hypot(x[1]);
                let s = if (r - r_in).abs() < (r - r_out).abs() { 1.0 } else { -1.0 };
                linalg::scale(x, s / r)
            }
            Chart::Hemisphere { radius } => {
                let r = x[0].hypot(x[1]);
                linalg::scale(x, -1.0 / (r * radius))
            }
            Chart::HemispherePolar { radius } => [-1.0 / radius, 0.0],
            Chart::Tabulated { .. } => return None,
        })
    }

    /// Closed-form second fundamental form `II(X,X)/|X|²` at a boundary point.
    pub fn exact_second_fundamental_form(&self, x: &Vec2) -> Option<f64> {
        Some(match &self.chart {
            Chart::Interval { .. } | Chart::Hemisphere { .. } | Chart::HemispherePolar { .. } => 0.0,
            Chart::Disk { radius } => 1.0 / radius,
            Chart::Annulus { r_in, r_out } => {
                let r = x[0].hypot(x[1]);
                if (r - r_in).abs() < (r - r_out).abs() {
                    -1.0 / r_in
                } else {
                    1.0 / r_out
                }
            }
            Chart::Tabulated { .. } => return None,
        })
    }
}

/// Closed-form curvature of a built-in (constant Gauss curvature; `Ric = κ g`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Catalog {
    pub gauss_curvature: f64,
}

/// `Γ[k][i][j] = Γ^k_{ij}`.
pub type Christoffel = [[[f64; 2]; 2]; 2];

#[inline]
fn stereo_scale(radius: f64, x: &Vec2) -> f64 {
    2.0 * radius / (1.0 + x[0] * x[0] + x[1] * x[1])
}

/// Unit-sphere point of a stereographic chart point.
pub fn stereo_to_sphere(x: &Vec2) -> [f64; 3] {
    let s = 1.0 + x[0] * x[0] + x[1] * x[1];
    [2.0 * x[0] / s, 2.0 * x[1] / s, (2.0 - s) / s]
}

/// Stereographic chart point of the polar angle `θ` (azimuth 0).
pub fn stereo_from_polar(theta: f64, azimuth: f64) -> Vec2 {
    let r = (0.5 * theta).tan();
    [r * azimuth.cos(), r * azimuth.sin()]
}

/// Polar angle `θ` of a stereographic chart point.
pub fn stereo_polar_angle(x: &Vec2) -> f64 {
    2.0 * x[0].hypot(x[1]).atan()
}

pub fn polar_to_sphere(x: &Vec2) -> [f64; 3] {
    let (st, ct) = x[0].sin_cos();
    let (sp, cp) = x[1].sin_cos();
    [st * cp, st * sp, ct]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereographic_boundary_is_equator() {
        let m = ManifoldSpec::upper_hemisphere(1.0);
        let p = [0.6, 0.8];
        assert!(m.boundary_fn(&p).abs() < 1e-15);
        let s = stereo_to_sphere(&p);
        assert!(s[2].abs() < 1e-15);
        assert!((stereo_polar_angle(&stereo_from_polar(0.7, 1.0)) - 0.7).abs() < 1e-14);
    }

    #[test]
    fn projection_lengths_match_geometry() {
        let m = ManifoldSpec::disk(2.0);
        let (p, l) = m.project_to_boundary(&[0.0, 2.5]);
        assert!((p[1] - 2.0).abs() < 1e-15 && (l - 0.5).abs() < 1e-15);
        let h = ManifoldSpec::upper_hemisphere(1.0);
        let (p, l) = h.project_to_boundary(&[1.2, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-15);
        // Equals the polar-angle difference on the unit sphere.
        let exact = stereo_polar_angle(&[1.2, 0.0]) - FRAC_PI_2;
        assert!((l - exact).abs() < 1e-14);
    }

    #[test]
    fn newton_projection_lands_on_boundary() {
        let n = 21;
        let mut planes = [Vec::new(), Vec::new(), Vec::new()];
        for _ in 0..n * n {
            planes[0].push(1.0);
            planes[1].push(0.0);
            planes[2].push(1.0);
        }
        let grid = MetricGrid::from_planes(2, n, n, (-2.0, 2.0), (-2.0, 2.0), planes);
        let m = ManifoldSpec::tabulated(grid, GridBoundary::Disk { center: ZERO2, radius: 1.0 }).unwrap();
        let (p, l) = m.project_to_boundary(&[0.0, 1.1]);
        assert!(m.boundary_fn(&p).abs() < 1e-8);
        assert!((l - 0.1).abs() < 1e-6);
    }
}
