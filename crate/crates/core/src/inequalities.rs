//! Both sides of the gradient estimates and functional inequalities,
//! assembled from estimators and oracles, with verdicts.

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{self, EstimatorError, KField, McEstimate, Setup};
use crate::functions::TestFunction;
use crate::geometry::manifold::{stereo_from_polar, HALF_LINE_WINDOW};
use crate::geometry::{Chart, GeometryError, ManifoldSpec};
use crate::linalg::Vec2;
use crate::oracle::{self, GaussLegendre, KernelSpec, MeasureRule, OracleError, PdeGrid, SpectralKernel, ZonalSeries};
use crate::phi::{self, PhiError, PhiField, Status};
use crate::report::{digest, CheckReport, Hypotheses};
use crate::sampler::SimConfig;

#[derive(Debug, Error)]
pub enum InequalityError {
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("ξ must be positive, found {value} at t = {t}")]
    NonPositiveXi { t: f64, value: f64 },
}

type Result<T> = std::result::Result<T, InequalityError>;

/// Below this `|K| t` the coefficients switch to their series.
pub const SERIES_SWITCH: f64 = 1e-6;

/// `(1 − e^{−2Kt}) / K`, tending to `2t` as `K → 0`.
pub fn variance_coefficient(k: f64, t: f64) -> f64 {
    if (k * t).abs() < SERIES_SWITCH {
        2.0 * t * (1.0 - k * t)
    } else {
        -(-2.0 * k * t).exp_m1() / k
    }
}

/// `(e^{2Kt} − 1) / K`, tending to `2t` as `K → 0`.
pub fn reverse_coefficient(k: f64, t: f64) -> f64 {
    if (k * t).abs() < SERIES_SWITCH {
        2.0 * t * (1.0 + k * t)
    } else {
        (2.0 * k * t).exp_m1() / k
    }
}

/// `(e^{Kt} − 1) / K`, tending to `t`.
fn kernel_coefficient(k: f64, t: f64) -> f64 {
    if (k * t).abs() < SERIES_SWITCH {
        t * (1.0 + 0.5 * k * t)
    } else {
        (k * t).exp_m1() / k
    }
}

/// `‖φ‖² ρ² K / (2(e^{2Kt} − 1))`; zero when `ρ = 0`, infinite at `t = 0`.
pub fn harnack_cost(phi_sup: f64, k: f64, rho: f64, t: f64) -> f64 {
    if rho == 0.0 {
        0.0
    } else if t == 0.0 {
        f64::INFINITY
    } else {
        phi_sup * phi_sup * rho * rho / (2.0 * reverse_coefficient(k, t))
    }
}

/// A quantity with its Monte Carlo standard error and certified oracle error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Q {
    pub v: f64,
    pub se: f64,
    pub err: f64,
    pub unreliable: bool,
}

impl Q {
    pub fn exact(v: f64) -> Self {
        Self { v, se: 0.0, err: 0.0, unreliable: false }
    }

    pub fn oracle(v: f64, err: f64) -> Self {
        Self { v, se: 0.0, err, unreliable: false }
    }

    pub fn mc(e: &McEstimate) -> Self {
        Self { v: e.mean, se: e.stderr, err: 0.0, unreliable: e.unreliable() }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { v: c * self.v, se: c.abs() * self.se, err: c.abs() * self.err, ..self }
    }

    pub fn square(self) -> Self {
        let a = self.v.abs();
        Self { v: self.v * self.v, se: 2.0 * a * self.se, err: 2.0 * a * self.err + self.err * self.err, ..self }
    }

    pub fn ln(self) -> Self {
        let lo = self.v - self.err;
        Self { v: self.v.ln(), se: self.se / self.v, err: if lo > 0.0 { self.v.ln() - lo.ln() } else { f64::INFINITY }, ..self }
    }
}

impl std::ops::Add for Q {
    type Output = Q;

    fn add(self, o: Q) -> Q {
        Q { v: self.v + o.v, se: self.se.hypot(o.se), err: self.err + o.err, unreliable: self.unreliable || o.unreliable }
    }
}

impl std::ops::Sub for Q {
    type Output = Q;

    fn sub(self, o: Q) -> Q {
        self + o.scale(-1.0)
    }
}

impl std::ops::Mul for Q {
    type Output = Q;

    fn mul(self, o: Q) -> Q {
        Q {
            v: self.v * o.v,
            se: (o.v.abs() * self.se).hypot(self.v.abs() * o.se),
            err: o.v.abs() * self.err + self.v.abs() * o.err + self.err * o.err,
            unreliable: self.unreliable || o.unreliable,
        }
    }
}

/// A verdict from two sides, `3·se` as the statistical tolerance.
fn judge(id: &str, case: String, lhs: Q, rhs: Q, bias: f64, hyp: &Hypotheses) -> CheckReport {
    let stat = 3.0 * lhs.se.hypot(rhs.se);
    let r = CheckReport::assess(id, case, lhs.v, rhs.v, stat, lhs.err + rhs.err, bias, hyp.clone());
    if lhs.unreliable || rhs.unreliable {
        let mut r = r.with_note("path abort rate above limit");
        if r.verdict == crate::report::Verdict::Holds {
            r.verdict = crate::report::Verdict::Inconclusive;
        }
        r
    } else {
        r
    }
}

/// The manifold, weight and hypothesis settings shared by all checks.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub m: &'a ManifoldSpec,
    pub phi: &'a PhiField,
    /// Declared curvature constant, accepted when the grid bound confirms it.
    pub declared_k: Option<f64>,
    pub grid: usize,
    pub strict_class_d: bool,
}

impl<'a> Problem<'a> {
    pub fn new(m: &'a ManifoldSpec, phi: &'a PhiField) -> Self {
        Self { m, phi, declared_k: None, grid: phi::DEFAULT_GRID, strict_class_d: false }
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.declared_k = Some(k);
        self
    }

    /// Curvature constant for exponent `p`, recorded in `hyp`.
    pub fn curvature(&self, p: u32, hyp: &mut Hypotheses) -> Result<f64> {
        let report = phi::curvature_lower_bound(self.m, self.phi, p, self.grid)?;
        let k = match self.declared_k {
            Some(d) if d <= report.raw_min + report.margin => d,
            Some(d) => {
                hyp.fail(format!("declared K = {d} exceeds the grid minimum {}", report.raw_min));
                report.k
            }
            None => report.k,
        };
        hyp.k = Some(k);
        hyp.k_digest = Some(digest(&report));
        Ok(k)
    }

    /// Runs the class-𝒟 check and records failures in `hyp`.
    pub fn class_d(&self, hyp: &mut Hypotheses) -> Result<phi::ClassDReport> {
        let report = phi::class_d_check(self.m, self.phi, self.strict_class_d, self.grid)?;
        hyp.class_d_digest = Some(digest(&report));
        if report.inf_status == Status::Fail {
            hyp.fail(format!("class D (a): inf φ = {}", report.inf_phi));
        }
        if report.normal_status == Status::Fail {
            hyp.fail(format!("class D (b): max |Nφ| = {:e}", report.max_normal_derivative));
        }
        if !report.convexity_holds() {
            hyp.fail(format!("class D (c): min II + N log φ = {:.6}", report.min_convexity));
        }
        Ok(report)
    }

    pub fn phi_sup(&self, hyp: &mut Hypotheses) -> f64 {
        let s = phi::sup_norm(self.m, self.phi, self.grid);
        hyp.phi_sup = Some(s);
        s
    }

    /// Class 𝒟, `K` for exponent `p` and `‖φ‖_∞`.
    fn hypotheses(&self, p: u32) -> Result<(Hypotheses, f64, f64)> {
        let mut hyp = Hypotheses::default();
        self.class_d(&mut hyp)?;
        let k = self.curvature(p, &mut hyp)?;
        let sup = self.phi_sup(&mut hyp);
        Ok((hyp, k, sup))
    }
}

/// Monte Carlo settings of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McParams {
    pub n: usize,
    pub h: f64,
    pub seed: u64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Allowance for the time-discretisation bias of the scheme.
    #[serde(default)]
    pub bias_tol: f64,
    /// Largest acceptable statistical tolerance; above it the check is inconclusive.
    #[serde(default)]
    pub stat_budget: Option<f64>,
}

fn default_delta() -> f64 {
    estimators::DEFAULT_DELTA
}

impl McParams {
    pub fn new(n: usize, h: f64, seed: u64) -> Self {
        Self { n, h, seed, delta: default_delta(), bias_tol: 0.0, stat_budget: None }
    }

    fn setup<'a>(&self, m: &'a ManifoldSpec, phi: &'a PhiField, offset: u64) -> Setup<'a> {
        let mut s = Setup::new(m, phi, SimConfig::new(self.h, self.seed));
        s.offset = offset;
        s
    }
}

/// Resolution of the deterministic oracles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    /// Cells of the coarsest PDE level.
    pub cells: usize,
    /// Time step of the coarsest PDE level; all times must be multiples.
    pub k: f64,
    /// Degree of zonal series on the hemisphere.
    pub lmax: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self { cells: 300, k: 1e-3, lmax: 48 }
    }
}

fn point_label(x: &Vec2, dim: usize) -> String {
    if dim == 1 {
        format!("{:.4}", x[0])
    } else {
        format!("({:.4},{:.4})", x[0], x[1])
    }
}

// ---------------------------------------------------------------------------
// Gradient estimate, weighted and tilted forms.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckGrid {
    pub functions: Vec<TestFunction>,
    pub points: Vec<Vec2>,
    pub times: Vec<f64>,
    /// Point pairs `(x, y)` for two-point inequalities.
    #[serde(default)]
    pub pairs: Vec<(Vec2, Vec2)>,
}

/// `|∇P_t f| ≤ e^{−Kt}`-type bound in its weighted and its tilted form, two
/// reports per `(f, x, t)`.
pub fn verify_gradient_thm11(pb: &Problem<'_>, grid: &CheckGrid, mc: &McParams) -> Result<Vec<CheckReport>> {
    let mut hyp = Hypotheses::default();
    pb.class_d(&mut hyp)?;
    let k = pb.curvature(1, &mut hyp)?;
    pb.phi_sup(&mut hyp);
    let kf = KField::Constant(k);
    let dim = pb.m.dim();
    let mut out = Vec::new();
    let n64 = mc.n as u64;
    for f in &grid.functions {
        for x in &grid.points {
            let grad = estimators::estimate_grad_pt_multi(&mc.setup(pb.m, pb.phi, 0), f, x, &grid.times, mc.n, mc.delta)?;
            let rhs_setup = mc.setup(pb.m, pb.phi, 4 * n64);
            let weighted = estimators::rhs_thm_weighted(&rhs_setup, &kf, f, x, &grid.times, mc.n)?;
            let tilted = estimators::rhs_thm_tilted(&rhs_setup, &kf, f, x, &grid.times, mc.n)?;
            for (j, t) in grid.times.iter().enumerate() {
                let case = format!("f={} x={} t={t}", f.name(), point_label(x, dim));
                let lhs = Q::mc(&grad[j].norm);
                let bias = mc.bias_tol + if grad[j].one_sided { mc.delta * (1.0 + lhs.v) } else { 0.0 };
                for (id, rhs) in [("thm11.weighted", &weighted[j]), ("thm11.tilted", &tilted[j])] {
                    let mut r = judge(id, case.clone(), lhs, Q::mc(rhs), bias, &hyp);
                    if rhs.heavy_tail() {
                        r = r.with_note("heavy-tailed weights");
                    }
                    out.push(r);
                }
            }
        }
    }
    Ok(out)
}

/// The flat annulus `1 ≤ r ≤ 2` with `φ ≡ 1` and `f = cos ϑ` at `x = (0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeCase {
    pub times: Vec<f64>,
    pub oracle: OracleParams,
    /// Monte Carlo reproduction; skipped when absent.
    pub mc: Option<McParams>,
}

impl Default for NegativeCase {
    fn default() -> Self {
        Self { times: vec![0.0025, 0.005, 0.01], oracle: OracleParams { cells: 200, k: 1.25e-4, lmax: 0 }, mc: None }
    }
}

/// Compares `|∇P_t f|²` with `P_t|∇f|²` on the inner circle where the
/// boundary is concave. Reports are flagged negative: they must read VIOLATED.
pub fn negative_thm11_annulus(case: &NegativeCase) -> Result<Vec<CheckReport>> {
    let m = ManifoldSpec::annulus(1.0, 2.0);
    let phi = PhiField::One;
    let pb = Problem::new(&m, &phi);
    let mut hyp = Hypotheses::default();
    pb.class_d(&mut hyp)?;
    pb.curvature(1, &mut hyp)?;
    pb.phi_sup(&mut hyp);
    let o = &case.oracle;
    let u1 = oracle::annulus_mode_solver(1.0, 2.0, 1, |_| 1.0, &case.times, o.cells, o.k)?;
    let v0 = oracle::annulus_mode_solver(1.0, 2.0, 0, |r| 1.0 / (r * r), &case.times, o.cells, o.k)?;
    let v2 = oracle::annulus_mode_solver(1.0, 2.0, 2, |r| 1.0 / (r * r), &case.times, o.cells, o.k)?;
    let x: Vec2 = [0.0, 1.0];
    let f = TestFunction::CosMode { mode: 1, amp: 1.0, offset: 0.0 };
    let mut out = Vec::new();
    for (j, t) in case.times.iter().enumerate() {
        let case_label = format!("f={} x=(0,1) t={t}", f.name());
        let (u, eu) = u1[j].at(1.0);
        let (a, ea) = v0[j].at(1.0);
        let (b, eb) = v2[j].at(1.0);
        // |∇P_t f|² = u₁(t,1)²; P_t|∇f|² = (v₀ + v₂)(t,1)/2 at ϑ = π/2.
        let lhs = Q::oracle(u, eu).square();
        let rhs = Q::oracle(0.5 * (a + b), 0.5 * (ea + eb));
        out.push(judge("thm11.negative.oracle", case_label, lhs, rhs, 0.0, &hyp).as_negative());
    }
    if let Some(mc) = &case.mc {
        let grad = estimators::estimate_grad_pt_multi(&mc.setup(&m, &phi, 0), &f, &x, &case.times, mc.n, mc.delta)?;
        let field = |y: &Vec2| {
            let r2 = y[0] * y[0] + y[1] * y[1];
            y[1] * y[1] / (r2 * r2)
        };
        let rhs = estimators::estimate_pt_field(&mc.setup(&m, &phi, 4 * mc.n as u64), &field, &x, &case.times, mc.n)?;
        for (j, t) in case.times.iter().enumerate() {
            let lhs = Q::mc(&grad[j].norm).square();
            let case_label = format!("f={} x=(0,1) t={t}", f.name());
            out.push(judge("thm11.negative.mc", case_label, lhs, Q::mc(&rhs[j]), mc.bias_tol, &hyp).as_negative());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Semigroup backends.

/// Where `P_t` values come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Oracle where one exists, Monte Carlo otherwise.
    #[default]
    Auto,
    Oracle,
    MonteCarlo,
}

type FieldRef<'f> = &'f (dyn Fn(&Vec2) -> f64 + Sync);

trait Semigroup {
    /// `P_t g(x)`.
    fn pt(&self, g: FieldRef<'_>, x: &Vec2, t: f64) -> Result<Q>;
    /// `|∇P_t f|(x)`.
    fn grad_pt(&self, f: &TestFunction, x: &Vec2, t: f64) -> Result<Q>;
    fn supports(&self, f: &TestFunction) -> bool;
    fn bias(&self) -> f64;
}

/// Certified Neumann solves on a line.
struct LineOracle<'a> {
    m: &'a ManifoldSpec,
    grid: PdeGrid,
}

impl<'a> LineOracle<'a> {
    fn new(m: &'a ManifoldSpec, o: &OracleParams) -> Result<Self> {
        let b = match m.chart {
            Chart::Interval { length, half_line } => {
                if half_line {
                    HALF_LINE_WINDOW
                } else {
                    length
                }
            }
            _ => return Err(InequalityError::Unsupported("line oracle on a 2-D chart".into())),
        };
        if m.linear_drift.is_some() {
            return Err(InequalityError::Unsupported("line oracle with a non-gradient drift".into()));
        }
        let pot = m.potential;
        let grid = PdeGrid::with_potential(0.0, b, o.cells, o.k, move |x| pot.value(&[x, 0.0], 1))?;
        Ok(Self { m, grid })
    }

    fn solve(&self, g: FieldRef<'_>, t: f64) -> Result<oracle::Certified> {
        Ok(oracle::certified_solve(&self.grid, |s| g(&[s, 0.0]), &[t])?.remove(0))
    }
}

impl Semigroup for LineOracle<'_> {
    fn pt(&self, g: FieldRef<'_>, x: &Vec2, t: f64) -> Result<Q> {
        if t == 0.0 {
            return Ok(Q::exact(g(x)));
        }
        let (v, e) = self.solve(g, t)?.at(x[0]);
        Ok(Q::oracle(v, e))
    }

    fn grad_pt(&self, f: &TestFunction, x: &Vec2, t: f64) -> Result<Q> {
        if t == 0.0 {
            return Ok(Q::exact(f.grad_norm(self.m, x)));
        }
        let field = f.field(self.m);
        let (d, e) = self.solve(&field, t)?.derivative_at(x[0]);
        Ok(Q::oracle(d.abs(), e))
    }

    fn supports(&self, _: &TestFunction) -> bool {
        true
    }

    fn bias(&self) -> f64 {
        0.0
    }
}

/// Legendre series of zonal data on the hemisphere with `φ ≡ 1`.
struct ZonalOracle<'a> {
    m: &'a ManifoldSpec,
    radius: f64,
    lmax: usize,
}

impl<'a> ZonalOracle<'a> {
    fn new(m: &'a ManifoldSpec, phi: &PhiField, o: &OracleParams) -> Option<Self> {
        let radius = match m.chart {
            Chart::Hemisphere { radius } | Chart::HemispherePolar { radius } => radius,
            _ => return None,
        };
        (phi.is_one() && !m.has_drift()).then_some(Self { m, radius, lmax: o.lmax.max(8) })
    }

    fn chart_point(&self, theta: f64) -> Vec2 {
        match self.m.chart {
            Chart::HemispherePolar { .. } => [theta, 0.0],
            _ => stereo_from_polar(theta, 0.0),
        }
    }

    fn series(&self, g: FieldRef<'_>, lmax: usize) -> ZonalSeries {
        ZonalSeries::from_function(|c| g(&self.chart_point(c.clamp(-1.0, 1.0).acos())), self.radius, lmax)
    }

    fn pair(&self, g: FieldRef<'_>) -> (ZonalSeries, ZonalSeries) {
        (self.series(g, self.lmax), self.series(g, self.lmax * 3 / 4))
    }
}

impl Semigroup for ZonalOracle<'_> {
    fn pt(&self, g: FieldRef<'_>, x: &Vec2, t: f64) -> Result<Q> {
        let th = crate::functions::polar_angle(self.m, x);
        let (hi, lo) = self.pair(g);
        let v = hi.value(th, t);
        Ok(Q::oracle(v, (v - lo.value(th, t)).abs()))
    }

    fn grad_pt(&self, f: &TestFunction, x: &Vec2, t: f64) -> Result<Q> {
        let th = crate::functions::polar_angle(self.m, x);
        let field = f.field(self.m);
        let (hi, lo) = self.pair(&field);
        let v = hi.meridian_gradient(th, t);
        Ok(Q::oracle(v.abs(), (v - lo.meridian_gradient(th, t)).abs()))
    }

    fn supports(&self, f: &TestFunction) -> bool {
        matches!(f, TestFunction::Sin2 | TestFunction::Constant { .. })
    }

    fn bias(&self) -> f64 {
        0.0
    }
}

/// Independent Monte Carlo estimates: each call draws a fresh range of path
/// indices, so calls are deterministic in their order.
struct McSemigroup<'a> {
    m: &'a ManifoldSpec,
    phi: &'a PhiField,
    mc: McParams,
    next: Cell<u64>,
}

impl<'a> McSemigroup<'a> {
    fn new(m: &'a ManifoldSpec, phi: &'a PhiField, mc: &McParams) -> Self {
        Self { m, phi, mc: mc.clone(), next: Cell::new(0) }
    }

    fn setup(&self) -> Setup<'a> {
        let k = self.next.get();
        self.next.set(k + 1);
        // Gradient stencils use up to four streams per path.
        self.mc.setup(self.m, self.phi, k * 4 * self.mc.n as u64)
    }
}

impl Semigroup for McSemigroup<'_> {
    fn pt(&self, g: FieldRef<'_>, x: &Vec2, t: f64) -> Result<Q> {
        if t == 0.0 {
            return Ok(Q::exact(g(x)));
        }
        Ok(Q::mc(&estimators::estimate_pt_field(&self.setup(), g, x, &[t], self.mc.n)?[0]))
    }

    fn grad_pt(&self, f: &TestFunction, x: &Vec2, t: f64) -> Result<Q> {
        if t == 0.0 {
            return Ok(Q::exact(f.grad_norm(self.m, x)));
        }
        let g = estimators::estimate_grad_pt(&self.setup(), f, x, t, self.mc.n, self.mc.delta)?;
        let mut q = Q::mc(&g.norm);
        if g.one_sided {
            q.err += self.mc.delta * (1.0 + q.v);
        }
        Ok(q)
    }

    fn supports(&self, _: &TestFunction) -> bool {
        true
    }

    fn bias(&self) -> f64 {
        self.mc.bias_tol
    }
}

fn pick_backend<'a>(
    m: &'a ManifoldSpec,
    phi: &'a PhiField,
    backend: Backend,
    mc: &McParams,
    o: &OracleParams,
) -> Result<(Option<Box<dyn Semigroup + 'a>>, McSemigroup<'a>)> {
    let fallback = McSemigroup::new(m, phi, mc);
    if backend == Backend::MonteCarlo {
        return Ok((None, fallback));
    }
    let oracle: Option<Box<dyn Semigroup + 'a>> = if m.dim() == 1 {
        Some(Box::new(LineOracle::new(m, o)?))
    } else {
        ZonalOracle::new(m, phi, o).map(|z| Box::new(z) as Box<dyn Semigroup>)
    };
    if backend == Backend::Oracle && oracle.is_none() {
        return Err(InequalityError::Unsupported(format!("no oracle for {}", m.name())));
    }
    Ok((oracle, fallback))
}

/// Smallest value of `f` over the verification grid.
fn grid_min(m: &ManifoldSpec, f: &TestFunction, n: usize) -> f64 {
    m.grid_points(n).iter().map(|p| f.eval(m, p)).fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// Gradient bound, log-Harnack and variance bounds.

/// The four corollary checks. Per `(f, x, t)`: the `φ`-weighted gradient
/// bound and the two variance bounds; per `(f, (x, y), t)` with `f ≥ 1`: the
/// log-Harnack inequality.
pub fn verify_cor12(pb: &Problem<'_>, grid: &CheckGrid, backend: Backend, mc: &McParams, o: &OracleParams) -> Result<Vec<CheckReport>> {
    let (hyp, k, sup) = pb.hypotheses(2)?;
    let m = pb.m;
    let dim = m.dim();
    let (oracle, fallback) = pick_backend(m, pb.phi, backend, mc, o)?;
    let mut out = Vec::new();
    for f in &grid.functions {
        let sg: &dyn Semigroup = match &oracle {
            Some(s) if s.supports(f) => s.as_ref(),
            _ => &fallback,
        };
        let bias = sg.bias();
        let fv = f.field(m);
        let f2 = |y: &Vec2| fv(y).powi(2);
        let phi_grad = |y: &Vec2| pb.phi.value(y) * f.grad_norm(m, y);
        let grad2 = |y: &Vec2| f.grad_norm(m, y).powi(2);
        for x in &grid.points {
            for &t in &grid.times {
                let case = format!("f={} x={} t={t}", f.name(), point_label(x, dim));
                let grad = sg.grad_pt(f, x, t)?;
                let ptf = sg.pt(&fv, x, t)?;
                let ptf2 = sg.pt(&f2, x, t)?;
                let pgrad2 = sg.pt(&grad2, x, t)?;
                let phix = pb.phi.value(x);

                let lhs = grad.square().scale(phix * phix);
                let rhs = sg.pt(&phi_grad, x, t)?.square().scale((-2.0 * k * t).exp());
                out.push(judge("cor12.gradient", case.clone(), lhs, rhs, bias, &hyp));

                let rhs = ptf.square() + pgrad2.scale(sup * sup * variance_coefficient(k, t));
                out.push(judge("cor12.variance_upper", case.clone(), ptf2, rhs, bias, &hyp));

                let lhs = ptf.square() + grad.square().scale(reverse_coefficient(k, t) / (sup * sup));
                out.push(judge("cor12.variance_lower", case, lhs, ptf2, bias, &hyp));
            }
        }
        let logf = |y: &Vec2| fv(y).ln();
        for (x, y) in &grid.pairs {
            for &t in &grid.times {
                let case = format!("f={} x={} y={} t={t}", f.name(), point_label(x, dim), point_label(y, dim));
                if grid_min(m, f, pb.grid) < 1.0 {
                    out.push(CheckReport::inconclusive("cor12.log_harnack", case, "requires f ≥ 1", hyp.clone()));
                    continue;
                }
                let lhs = sg.pt(&logf, y, t)?;
                let rho = m.distance(x, y);
                let rhs = sg.pt(&fv, x, t)?.ln() + Q::exact(harnack_cost(sup, k, rho, t));
                out.push(judge("cor12.log_harnack", case, lhs, rhs, bias, &hyp));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Inequalities for the invariant measure.

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadParams {
    pub panels: usize,
    pub angular: usize,
}

impl Default for QuadParams {
    fn default() -> Self {
        Self { panels: 60, angular: 128 }
    }
}

/// `μ`-integrals by the quadrature rule and by one at half resolution; the
/// spread certifies the error.
struct MuPair {
    fine: MeasureRule,
    coarse: MeasureRule,
}

impl MuPair {
    fn new(m: &ManifoldSpec, q: &QuadParams) -> Result<Self> {
        Ok(Self {
            fine: MeasureRule::new(m, q.panels, q.angular)?,
            coarse: MeasureRule::new(m, (q.panels / 2).max(1), (q.angular / 2).max(1))?,
        })
    }

    /// Evaluates `h(rule)` on both rules.
    fn eval(&self, h: impl Fn(&MeasureRule) -> f64) -> Q {
        let a = h(&self.fine);
        Q::oracle(a, (a - h(&self.coarse)).abs())
    }
}

fn gradient_form(pb: &Problem<'_>, hyp: &mut Hypotheses) {
    if pb.m.linear_drift.is_some() {
        hyp.fail("drift is not of gradient form");
    }
}

/// `μ(f²) ≤ μ(f)² + ‖φ‖²/K_φ · μ(|∇f|²)` for each function.
pub fn verify_poincare(pb: &Problem<'_>, functions: &[TestFunction], q: &QuadParams) -> Result<Vec<CheckReport>> {
    let (mut hyp, k, sup) = pb.hypotheses(2)?;
    gradient_form(pb, &mut hyp);
    if k <= 0.0 {
        hyp.fail(format!("K_φ = {k} is not positive"));
    }
    let mu = MuPair::new(pb.m, q)?;
    let m = pb.m;
    Ok(functions
        .iter()
        .map(|f| {
            let var = mu.eval(|r| {
                let mean = r.mean(|x| f.eval(m, x));
                r.mean(|x| (f.eval(m, x) - mean).powi(2))
            });
            let energy = mu.eval(|r| r.mean(|x| f.grad_norm(m, x).powi(2)));
            let rhs = if k > 0.0 { energy.scale(sup * sup / k) } else { Q::exact(f64::INFINITY) };
            judge("poincare", format!("f={}", f.name()), var, rhs, 0.0, &hyp)
        })
        .collect())
}

/// `μ(f² log f²) − μ(f²) log μ(f²)` and `μ(|∇f|²)` after normalising
/// `μ(f²) = 1` on the given rule.
fn entropy_and_energy(m: &ManifoldSpec, f: &TestFunction, r: &MeasureRule) -> (f64, f64, f64) {
    let z = r.mean(|x| f.eval(m, x).powi(2));
    let ent = r.mean(|x| {
        let g2 = f.eval(m, x).powi(2) / z;
        if g2 > 0.0 {
            g2 * g2.ln()
        } else {
            0.0
        }
    });
    let energy = r.mean(|x| f.grad_norm(m, x).powi(2)) / z;
    (ent, energy, z)
}

/// `μ(f² log f²) ≤ 2‖φ‖⁶/K_φ · μ(|∇f|²)` for `f` normalised to `μ(f²) = 1`.
pub fn verify_logsobolev(pb: &Problem<'_>, functions: &[TestFunction], q: &QuadParams) -> Result<Vec<CheckReport>> {
    let (mut hyp, k, sup) = pb.hypotheses(2)?;
    gradient_form(pb, &mut hyp);
    if k <= 0.0 {
        hyp.fail(format!("K_φ = {k} is not positive"));
    }
    let mu = MuPair::new(pb.m, q)?;
    let m = pb.m;
    Ok(functions
        .iter()
        .map(|f| {
            let case = format!("f={}", f.name());
            if f.eval(m, &m.base_point()) == 0.0 && grid_min(m, f, pb.grid) == 0.0 && f.grad_norm(m, &m.base_point()) == 0.0 {
                return CheckReport::inconclusive("logsobolev", case, "f vanishes", hyp.clone());
            }
            let lhs = mu.eval(|r| entropy_and_energy(m, f, r).0);
            let energy = mu.eval(|r| entropy_and_energy(m, f, r).1);
            let rhs = if k > 0.0 { energy.scale(2.0 * sup.powi(6) / k) } else { Q::exact(f64::INFINITY) };
            judge("logsobolev", case, lhs, rhs, 0.0, &hyp)
        })
        .collect())
}

/// Cells of the piecewise-linear densities used for `W₂`.
pub const W2_CELLS: usize = 20_000;

/// Entropy bounded by `2‖φ‖⁴ √(μ|∇f|²) W₂ − ‖φ‖² K_φ W₂² / 2` on a line, for
/// `f` normalised to `μ(f²) = 1`. Requires `K_φ ≤ 0`.
pub fn verify_hwi_1d(pb: &Problem<'_>, functions: &[TestFunction], q: &QuadParams) -> Result<Vec<CheckReport>> {
    let m = pb.m;
    let b = match m.chart {
        Chart::Interval { length, half_line } => {
            if half_line {
                HALF_LINE_WINDOW
            } else {
                length
            }
        }
        _ => return Err(InequalityError::Unsupported("transport inequality in dimension 2".into())),
    };
    let (mut hyp, k, sup) = pb.hypotheses(2)?;
    gradient_form(pb, &mut hyp);
    if k > 0.0 {
        hyp.fail(format!("K_φ = {k} is positive"));
    }
    let mu = MuPair::new(m, q)?;
    let density =
        |w: &dyn Fn(f64) -> f64| oracle::Density1d::from_fn(0.0, b, W2_CELLS, |x| w(x) * m.reference_density(&[x, 0.0])).normalized();
    let base = density(&|_| 1.0);
    let mut out = Vec::new();
    for f in functions {
        let case = format!("f={}", f.name());
        let lhs = mu.eval(|r| entropy_and_energy(m, f, r).0);
        let energy = mu.eval(|r| entropy_and_energy(m, f, r).1);
        let tilted = density(&|x| f.eval(m, &[x, 0.0]).powi(2));
        let w = oracle::w2::w2_1d(&tilted, &base)?;
        let w_coarse = oracle::w2::w2_1d_with(&tilted, &base, oracle::w2::QUANTILE_NODES / 4)?;
        let w = Q::oracle(w, (w - w_coarse).abs());
        let root = Q::oracle(energy.v.sqrt(), energy.err / (2.0 * energy.v.sqrt().max(1e-300)));
        let rhs = (root * w).scale(2.0 * sup.powi(4)) - w.square().scale(0.5 * sup * sup * k);
        out.push(judge("hwi", case, lhs, rhs, 0.0, &hyp));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Heat kernel bounds.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCase {
    /// Points `x, y` of the grid.
    pub nodes: Vec<f64>,
    pub times: Vec<f64>,
}

/// Gauss panels for the entropy integral over `z`.
const ENTROPY_PANELS: usize = 40;
/// Points `z` whose kernel weight falls below this are skipped.
const NEGLIGIBLE_WEIGHT: f64 = 1e-15;

/// Pointwise lower bound `p_t(x,y) ≥ exp[−‖φ‖²Kρ²/(2(e^{Kt}−1))]` and the
/// relative-entropy bound, each reported as the worst case over the grid.
pub fn verify_heat_kernel(pb: &Problem<'_>, case: &KernelCase) -> Result<Vec<CheckReport>> {
    let m = pb.m;
    let b = match m.chart {
        Chart::Interval { length, half_line } => {
            if half_line {
                HALF_LINE_WINDOW
            } else {
                length
            }
        }
        _ => return Err(InequalityError::Unsupported("heat kernel oracle in dimension 2".into())),
    };
    let (mut hyp, k, sup) = pb.hypotheses(2)?;
    gradient_form(pb, &mut hyp);
    let pot = m.potential;
    let spec = KernelSpec {
        a: 0.0,
        b,
        v: std::sync::Arc::new(move |x| pot.value(&[x, 0.0], 1)),
        dv: std::sync::Arc::new(move |x| pot.differential(&[x, 0.0], 1)[0]),
    };
    let hi = SpectralKernel::new(&spec, oracle::kernel::DEFAULT_DEGREE);
    let lo = SpectralKernel::new(&spec, oracle::kernel::DEFAULT_DEGREE * 3 / 4);
    let gl = GaussLegendre::new(20);
    let (zs, zw) = gl.composite_points(0.0, b, ENTROPY_PANELS);
    let zw: Vec<f64> = zs.iter().zip(&zw).map(|(z, w)| w * hi.mu_density(*z)).collect();
    let mut out = Vec::new();
    for &t in &case.times {
        let table = oracle::kernel::kernel_table(&hi, &lo, &case.nodes, t)?;
        let mut worst: Option<(f64, String, Q, Q)> = None;
        let keep = |margin: f64, label: String, lhs: Q, rhs: Q, worst: &mut Option<(f64, String, Q, Q)>| {
            if worst.as_ref().is_none_or(|w| margin < w.0) {
                *worst = Some((margin, label, lhs, rhs));
            }
        };
        for (i, x) in case.nodes.iter().enumerate() {
            for (j, y) in case.nodes.iter().enumerate() {
                let rho = m.distance(&[*x, 0.0], &[*y, 0.0]);
                let bound = (-sup * sup * rho * rho / (2.0 * kernel_coefficient(k, t))).exp();
                let p = Q::oracle(table.p[(i, j)], table.error);
                keep(p.v - bound, format!("x={x:.4} y={y:.4} t={t}"), Q::exact(bound), p, &mut worst);
            }
        }
        if let Some((_, label, lhs, rhs)) = worst {
            out.push(judge("cor13.kernel_lower", label, lhs, rhs, 0.0, &hyp));
        }

        let (phx, plx) = (hi.kernel_matrix(&case.nodes, &zs, t), lo.kernel_matrix(&case.nodes, &zs, t));
        let entropy = |p: &nalgebra::DMatrix<f64>, i: usize, j: usize| -> (f64, f64) {
            let (mut s, mut skipped) = (0.0, 0.0);
            for (l, w) in zw.iter().enumerate() {
                let (a, c) = (p[(i, l)], p[(j, l)]);
                if w * a < NEGLIGIBLE_WEIGHT || a <= 0.0 || c <= 0.0 {
                    skipped += w * a.abs();
                    continue;
                }
                s += w * a * (a / c).ln();
            }
            (s, skipped)
        };
        let mut worst = None;
        for (i, x) in case.nodes.iter().enumerate() {
            for (j, y) in case.nodes.iter().enumerate() {
                let rho = m.distance(&[*x, 0.0], &[*y, 0.0]);
                let (e_hi, skipped) = entropy(&phx, i, j);
                let (e_lo, _) = entropy(&plx, i, j);
                let lhs = Q::oracle(e_hi, (e_hi - e_lo).abs() + skipped);
                let rhs = Q::exact(harnack_cost(sup, k, rho, t));
                // Diagonal pairs read 0 ≤ 0 and only win when nothing else is tested.
                let margin = if rho == 0.0 { f64::MAX } else { rhs.v - lhs.v };
                keep(margin, format!("x={x:.4} y={y:.4} t={t}"), lhs, rhs, &mut worst);
            }
        }
        if let Some((_, label, lhs, rhs)) = worst {
            out.push(judge("cor13.kernel_entropy", label, lhs, rhs, 0.0, &hyp));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Consequences of an L²-gradient estimate with rate ξ.

/// The rate `ξ_t` of `|∇P_t f|² ≤ ξ_t P_t|∇f|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Xi {
    /// `‖φ‖² e^{−2K_φ t}` from the curvature bound.
    FromCurvature,
    /// `scale · e^{rate · t}`
    Exponential { scale: f64, rate: f64 },
}

const XI_NODES: usize = 24;

/// Points `(x, y)` and times for the sandwich and log-Harnack checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiCase {
    pub xi: Xi,
    pub grid: CheckGrid,
    #[serde(default)]
    pub oracle: OracleParams,
}

/// Two-sided variance bound and log-Harnack inequality implied by the rate
/// `ξ`, on a line. `ξ` is accepted as a hypothesis when it dominates
/// `‖φ‖² e^{−2K_φ t}` on `[0, t]`.
pub fn verify_xi_consequences(pb: &Problem<'_>, case: &XiCase) -> Result<Vec<CheckReport>> {
    let (hyp, k, sup) = pb.hypotheses(2)?;
    let m = pb.m;
    let floor = |s: f64| sup * sup * (-2.0 * k * s).exp();
    let xi = |s: f64| match case.xi {
        Xi::FromCurvature => floor(s),
        Xi::Exponential { scale, rate } => scale * (rate * s).exp(),
    };
    let gl = GaussLegendre::new(XI_NODES);
    let sg = LineOracle::new(m, &case.oracle)?;
    let mut out = Vec::new();
    for &t in &case.grid.times {
        let mut hyp_t = hyp.clone();
        let mut s_inv = 0.0;
        let mut s_fwd = 0.0;
        if t > 0.0 {
            let half = 0.5 * t;
            for (z, w) in gl.nodes.iter().zip(&gl.weights) {
                let s = half * (1.0 + z);
                let v = xi(s);
                if !(v > 0.0) {
                    return Err(InequalityError::NonPositiveXi { t: s, value: v });
                }
                if v < floor(s) * (1.0 - 1e-12) {
                    hyp_t.fail(format!("ξ({s:.4}) = {v} is below the proven rate {}", floor(s)));
                }
                s_inv += w * half / v;
                s_fwd += w * half * v;
            }
        }
        for f in &case.grid.functions {
            let fv = f.field(m);
            let f2 = |y: &Vec2| fv(y).powi(2);
            let grad2 = |y: &Vec2| f.grad_norm(m, y).powi(2);
            for x in &case.grid.points {
                let label = format!("f={} x={:.4} t={t}", f.name(), x[0]);
                let ptf = sg.pt(&fv, x, t)?;
                let var = sg.pt(&f2, x, t)? - ptf.square();
                let lhs = sg.grad_pt(f, x, t)?.square().scale(2.0 * s_inv);
                out.push(judge("xi.variance_lower", label.clone(), lhs, var, 0.0, &hyp_t));
                let rhs = sg.pt(&grad2, x, t)?.scale(2.0 * s_fwd);
                out.push(judge("xi.variance_upper", label, var, rhs, 0.0, &hyp_t));
            }
            let logf = |y: &Vec2| fv(y).ln();
            for (x, y) in &case.grid.pairs {
                let label = format!("f={} x={:.4} y={:.4} t={t}", f.name(), x[0], y[0]);
                if grid_min(m, f, pb.grid) < 1.0 {
                    out.push(CheckReport::inconclusive("xi.log_harnack", label, "requires f ≥ 1", hyp_t.clone()));
                    continue;
                }
                let rho = m.distance(x, y);
                let cost = if rho == 0.0 {
                    0.0
                } else if t == 0.0 {
                    f64::INFINITY
                } else {
                    rho * rho / (4.0 * s_inv)
                };
                let lhs = sg.pt(&logf, y, t)?;
                let rhs = sg.pt(&fv, x, t)?.ln() + Q::exact(cost);
                out.push(judge("xi.log_harnack", label, lhs, rhs, 0.0, &hyp_t));
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Semigroup log-Sobolev inequality with the `L − 4∇log φ` process.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ls1Case {
    pub functions: Vec<TestFunction>,
    pub points: Vec<Vec2>,
    pub t: f64,
    /// Trapezoid intervals over `[0, t]`; must be even.
    #[serde(default = "default_intervals")]
    pub intervals: usize,
}

fn default_intervals() -> usize {
    8
}

/// Outcome of the composite-path integral.
#[derive(Debug, Clone)]
pub struct Ls1Integral {
    pub value: Q,
    /// Richardson estimate of the trapezoid error.
    pub quadrature_error: f64,
    /// `P_t|∇f|²(x)`, the integrand at `s = t`.
    pub endpoint: McEstimate,
}

/// `4‖φ‖² ∫₀ᵗ e^{−2K(t−s)} P_s P̄^φ_{t−s}|∇f|² ds` by the trapezoid rule on
/// `intervals` panels, one composite-path estimate per node.
#[allow(clippy::too_many_arguments)]
pub fn ls1_integral(
    pb: &Problem<'_>,
    mc: &McParams,
    f: &TestFunction,
    x: &Vec2,
    t: f64,
    k: f64,
    sup: f64,
    intervals: usize,
    offset: u64,
) -> Result<Ls1Integral> {
    let m = pb.m;
    let g = |y: &Vec2| f.grad_norm(m, y).powi(2);
    let hstep = t / intervals as f64;
    let mut nodes = Vec::with_capacity(intervals + 1);
    for i in 0..=intervals {
        let s = i as f64 * hstep;
        let setup = mc.setup(m, pb.phi, offset + i as u64 * mc.n as u64);
        let e = estimators::estimate_composite(&setup, &g, x, s, t, mc.n)?;
        nodes.push((s, e));
    }
    let trap = |step: usize| -> Q {
        let w = hstep * step as f64;
        let idx: Vec<usize> = (0..=intervals).step_by(step).collect();
        idx.iter().enumerate().fold(Q::exact(0.0), |acc, (pos, &i)| {
            let end = pos == 0 || pos + 1 == idx.len();
            let c = if end { 0.5 * w } else { w } * (-2.0 * k * (t - nodes[i].0)).exp();
            acc + Q::mc(&nodes[i].1).scale(c)
        })
    };
    let fine = trap(1);
    let coarse = trap(2);
    let scale = 4.0 * sup * sup;
    Ok(Ls1Integral {
        value: fine.scale(scale),
        quadrature_error: scale * (fine.v - coarse.v).abs() / 3.0,
        endpoint: nodes[intervals].1.clone(),
    })
}

/// `P_t(f² log f²) ≤ P_t f² log P_t f² + 4‖φ‖² ∫₀ᵗ e^{−2K(t−s)} P_s P̄^φ_{t−s}|∇f|² ds`.
pub fn verify_semigroup_logsobolev(pb: &Problem<'_>, case: &Ls1Case, mc: &McParams) -> Result<Vec<CheckReport>> {
    if case.intervals < 2 || case.intervals % 2 == 1 {
        return Err(InequalityError::Unsupported(format!("{} trapezoid intervals (need an even number)", case.intervals)));
    }
    let (hyp, k, sup) = pb.hypotheses(2)?;
    let m = pb.m;
    let dim = m.dim();
    let n64 = mc.n as u64;
    let mut out = Vec::new();
    for (fi, f) in case.functions.iter().enumerate() {
        let fv = f.field(m);
        let min_sq = m.grid_points(pb.grid).iter().map(|p| fv(p).powi(2)).fold(f64::INFINITY, f64::min);
        for (xi, x) in case.points.iter().enumerate() {
            let label = format!("f={} x={} t={}", f.name(), point_label(x, dim), case.t);
            if !(min_sq > 0.0) {
                out.push(CheckReport::inconclusive("ls1", label, "requires inf f² > 0", hyp.clone()));
                continue;
            }
            let block = ((fi * case.points.len() + xi) as u64) * (case.intervals as u64 + 2) * n64;
            let ent = |y: &Vec2| {
                let v = fv(y).powi(2);
                v * v.ln()
            };
            let sq = |y: &Vec2| fv(y).powi(2);
            let joint = estimators::estimate_joint(&mc.setup(m, pb.phi, block), &[&ent, &sq], x, case.t, mc.n)?;
            let (a, b) = (joint.mean[0], joint.mean[1]);
            let first = b * b.ln();
            // d/db (b log b) = log b + 1
            let diff_se = joint.stderr_of(&[1.0, -(b.ln() + 1.0)]);
            let lhs = Q { v: a - first, se: diff_se, err: 0.0, unreliable: false };
            let integral = ls1_integral(pb, mc, f, x, case.t, k, sup, case.intervals, block + n64)?;
            let bias = mc.bias_tol + integral.quadrature_error;
            let mut r = judge("ls1", label, Q::exact(first) + lhs, Q::exact(first) + integral.value, bias, &hyp);
            if pb.phi.is_one() {
                // With φ ≡ 1 the integrand is e^{−2K(t−s)} P_t|∇f|².
                let one_shot = 4.0 * sup * sup * integral.endpoint.mean * variance_coefficient(k, case.t) / 2.0;
                let se = 4.0 * sup * sup * integral.endpoint.stderr * variance_coefficient(k, case.t) / 2.0;
                let diff = (one_shot - integral.value.v).abs();
                let spread = se.hypot(integral.value.se);
                r = r.with_note(if spread > 0.0 {
                    format!("one-shot integral {one_shot:.6} (z = {:.2})", diff / spread)
                } else {
                    format!("one-shot integral {one_shot:.6} (difference {diff:.2e})")
                });
            }
            if let Some(budget) = mc.stat_budget {
                if r.stat_tol > budget {
                    r.verdict = crate::report::Verdict::Inconclusive;
                    r.note = Some(format!("statistical tolerance {:.3e} above budget {budget:.3e}", r.stat_tol));
                }
            }
            out.push(r);
        }
    }
    Ok(out)
}

/// Chart coordinates of the hemisphere point with polar angle `theta`.
pub fn hemisphere_point(m: &ManifoldSpec, theta: f64, azimuth: f64) -> Vec2 {
    match m.chart {
        Chart::HemispherePolar { .. } => [theta, azimuth],
        _ => stereo_from_polar(theta, azimuth),
    }
}

/// Deterministic `P_t f(x)` with its certified error, when an oracle covers
/// the manifold and `f`.
pub fn oracle_pt(m: &ManifoldSpec, phi: &PhiField, f: &TestFunction, x: &Vec2, t: f64, o: &OracleParams) -> Result<Option<(f64, f64)>> {
    let oracle: Option<Box<dyn Semigroup + '_>> = if m.dim() == 1 {
        Some(Box::new(LineOracle::new(m, o)?))
    } else {
        ZonalOracle::new(m, phi, o).map(|z| Box::new(z) as Box<dyn Semigroup>)
    };
    match oracle {
        Some(sg) if sg.supports(f) => {
            let q = sg.pt(&|y: &Vec2| f.eval(m, y), x, t)?;
            Ok(Some((q.v, q.err)))
        }
        _ => Ok(None),
    }
}
