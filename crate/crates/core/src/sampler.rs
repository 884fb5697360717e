//! Projection scheme for the reflected SDE `dX = √2 u∘dB + Z dt + N dl`.
//!
//! In chart coordinates the Itô form is
//! `dX^k = √2 (u dB)^k + (Z^k − g^{ij}Γ^k_{ij}) dt + N^k dl`, where the
//! columns of `u` are `g`-orthonormal. A tentative Euler step that leaves
//! `M` is projected back onto `∂M`; the Riemannian length of that correction
//! is the local-time increment.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functions::TestFunction;
use crate::geometry::{self, manifold::Chart, ChartBox, ManifoldSpec};
use crate::linalg::{self, Mat2, Vec2, ZERO2};
use crate::phi::PhiField;
use crate::rng::PathRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("step size must be positive, got {0}")]
    InvalidStep(f64),
    #[error("start point {0:?} is not in the manifold")]
    StartOutside(Vec2),
    #[error("time {0} is negative")]
    NegativeTime(f64),
}

/// Drift of the simulated process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftVariant {
    /// `Z`
    #[default]
    Base,
    /// `Z − 2∇log φ`
    Phi,
    /// `Z − 4∇log φ`
    Phi4,
}

impl DriftVariant {
    #[inline]
    pub fn phi_coefficient(self) -> f64 {
        match self {
            DriftVariant::Base => 0.0,
            DriftVariant::Phi => -2.0,
            DriftVariant::Phi4 => -4.0,
        }
    }
}

/// Per-run sampler settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub h: f64,
    pub seed: u64,
    pub drift: DriftVariant,
    /// Switch to another drift from the given time on.
    pub drift_switch: Option<(f64, DriftVariant)>,
}

impl SimConfig {
    pub fn new(h: f64, seed: u64) -> Self {
        Self { h, seed, drift: DriftVariant::Base, drift_switch: None }
    }

    pub fn with_drift(mut self, drift: DriftVariant) -> Self {
        self.drift = drift;
        self
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.h > 0.0 && self.h.is_finite() {
            Ok(())
        } else {
            Err(SamplerError::InvalidStep(self.h))
        }
    }
}

/// Scalar field integrated along the path.
#[derive(Clone)]
pub enum RunningField {
    /// `|∇ log φ|²`
    GradLogSq,
    Function(TestFunction),
    Field(Arc<dyn Fn(&Vec2) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for RunningField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunningField::GradLogSq => f.write_str("GradLogSq"),
            RunningField::Function(t) => write!(f, "Function({})", t.name()),
            RunningField::Field(_) => f.write_str("Field(..)"),
        }
    }
}

/// Path functionals accumulated alongside the state.
#[derive(Debug, Clone, Default)]
pub struct Functionals {
    /// Accumulate `∫⟨u^{-1}∇log φ, dB⟩`.
    pub stoch_integral: bool,
    /// Girsanov tilt `Z̃ = c ∇log φ`; the log-weight is accumulated when set.
    pub tilt: Option<f64>,
    pub running: Vec<RunningField>,
    /// Radii `r` for the exit times `σ_r = inf{s: ρ(X_s, x0) ≥ r}`.
    pub exit_radii: Vec<f64>,
}

impl Functionals {
    fn is_empty(&self) -> bool {
        !self.stoch_integral && self.tilt.is_none() && self.running.is_empty() && self.exit_radii.is_empty()
    }
}

/// First exit from a ball around the start point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Exit {
    pub time: Option<f64>,
    /// Local time at `σ_r`, or the running local time while inside.
    pub local_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    pub x: Vec2,
    /// Columns are a `g`-orthonormal basis of `T_xM`.
    pub frame: Mat2,
    pub t: f64,
    pub local_time: f64,
    pub log_weight: f64,
    pub stoch_integral: f64,
    pub running: Vec<f64>,
    pub exits: Vec<Exit>,
    pub steps: u64,
}

impl PathState {
    /// `l_{t∧σ_r}` for the `k`-th registered radius.
    pub fn stopped_local_time(&self, k: usize) -> f64 {
        match self.exits[k].time {
            Some(_) => self.exits[k].local_time,
            None => self.local_time,
        }
    }

    pub fn survived(&self, k: usize) -> bool {
        self.exits[k].time.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Abort {
    pub t: f64,
    pub tentative: Vec2,
}

/// States at the requested times; `aborted` is set when a tentative step
/// left the chart box, in which case `snapshots` is incomplete.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub snapshots: Vec<PathState>,
    pub aborted: Option<Abort>,
}

impl PathRecord {
    pub fn terminal(&self) -> Option<&PathState> {
        if self.aborted.is_some() {
            None
        } else {
            self.snapshots.last()
        }
    }
}

/// A configured sampler for one manifold and weight field.
pub struct Sampler<'a> {
    pub m: &'a ManifoldSpec,
    pub phi: &'a PhiField,
    pub cfg: SimConfig,
    pub fun: Functionals,
    domain: ChartBox,
    dim: usize,
    flat: bool,
}

impl<'a> Sampler<'a> {
    pub fn new(m: &'a ManifoldSpec, phi: &'a PhiField, cfg: SimConfig, fun: Functionals) -> Result<Self, SamplerError> {
        cfg.validate()?;
        Ok(Self { domain: m.domain(), dim: m.dim(), flat: m.is_flat_chart(), m, phi, cfg, fun })
    }

    pub fn initial_state(&self, x0: &Vec2) -> PathState {
        let frame = if self.flat { linalg::IDENTITY2 } else { linalg::orthonormal_frame(&self.m.metric(x0), self.dim) };
        PathState {
            x: *x0,
            frame,
            t: 0.0,
            local_time: 0.0,
            log_weight: 0.0,
            stoch_integral: 0.0,
            running: vec![0.0; self.fun.running.len()],
            exits: vec![Exit { time: None, local_time: 0.0 }; self.fun.exit_radii.len()],
            steps: 0,
        }
    }

    #[inline]
    fn drift_at(&self, x: &Vec2, variant: DriftVariant) -> Vec2 {
        let mut b = if self.m.has_drift() { self.m.drift(x) } else { ZERO2 };
        let c = variant.phi_coefficient();
        if c != 0.0 && !self.phi.is_one() {
            b = linalg::add(&b, &linalg::scale(&self.phi.grad_log(self.m, x), c));
        }
        if !self.flat {
            b = linalg::add(&b, &self.ito_correction(x));
        }
        b
    }

    /// `−g^{ij} Γ^k_{ij}`; vanishes for 2-D conformally flat charts.
    #[inline]
    fn ito_correction(&self, x: &Vec2) -> Vec2 {
        if matches!(self.m.chart, Chart::Hemisphere { .. }) {
            return ZERO2;
        }
        let gam = geometry::christoffel_fast(self.m, x);
        let ginv = linalg::inverse(&self.m.metric(x), self.dim).unwrap_or(linalg::IDENTITY2);
        let mut c = ZERO2;
        for (k, slot) in c.iter_mut().enumerate().take(self.dim) {
            for i in 0..self.dim {
                for j in 0..self.dim {
                    *slot -= ginv[i][j] * gam[k][i][j];
                }
            }
        }
        c
    }

    #[inline]
    fn variant_at(&self, t: f64) -> DriftVariant {
        match self.cfg.drift_switch {
            Some((s, v)) if t >= s - 1e-12 * s.max(1.0) => v,
            _ => self.cfg.drift,
        }
    }

    /// One step driven by the standard normal vector `gauss`. Returns the
    /// tentative point when it leaves the chart box (path aborted).
    pub fn step(&self, st: &mut PathState, gauss: &Vec2, x0: &Vec2) -> Result<(), Abort> {
        let h = self.cfg.h;
        let sqh = h.sqrt();
        let dim = self.dim;
        let x = st.x;
        let noise = if self.flat { *gauss } else { linalg::mat_vec(&st.frame, gauss, dim) };

        if self.fun.stoch_integral || self.fun.tilt.is_some() {
            let v = self.phi.grad_log(self.m, &x);
            let g = if self.flat { linalg::IDENTITY2 } else { self.m.metric(&x) };
            let inner = linalg::form(&g, &v, &noise, dim);
            if self.fun.stoch_integral {
                st.stoch_integral += inner * sqh;
            }
            if let Some(c) = self.fun.tilt {
                let v2 = linalg::form(&g, &v, &v, dim);
                st.log_weight += c * inner * sqh - 0.5 * c * c * v2 * h;
            }
        }
        for (acc, field) in st.running.iter_mut().zip(&self.fun.running) {
            *acc += h * match field {
                RunningField::GradLogSq => self.phi.grad_log_sq(self.m, &x),
                RunningField::Function(f) => f.eval(self.m, &x),
                RunningField::Field(w) => w(&x),
            };
        }

        let b = self.drift_at(&x, self.variant_at(st.t));
        let s = std::f64::consts::SQRT_2 * sqh;
        let mut y = [x[0] + s * noise[0] + b[0] * h, x[1] + s * noise[1] + b[1] * h];
        if dim == 1 {
            y[1] = 0.0;
        }
        if !self.domain.contains(&y, dim) {
            return Err(Abort { t: st.t, tentative: y });
        }
        if self.m.boundary_fn(&y) < 0.0 {
            let (p, len) = self.m.project_to_boundary(&y);
            st.local_time += len;
            y = p;
        }
        if !self.flat {
            self.transport(&mut st.frame, &x, &y);
        }
        self.domain.wrap(&mut y, dim);
        st.x = y;
        st.steps += 1;
        st.t = st.steps as f64 * h;

        if !self.fun.exit_radii.is_empty() {
            let d = self.m.distance(x0, &y);
            for (e, &r) in st.exits.iter_mut().zip(&self.fun.exit_radii) {
                if e.time.is_none() {
                    e.local_time = st.local_time;
                    if d >= r {
                        e.time = Some(st.t);
                    }
                }
            }
        }
        Ok(())
    }

    /// Explicit Euler parallel transport along `x → y`, then Gram–Schmidt in `g(y)`.
    fn transport(&self, frame: &mut Mat2, x: &Vec2, y: &Vec2) {
        let dim = self.dim;
        let gam = geometry::christoffel_fast(self.m, x);
        let mut dx = linalg::sub(y, x);
        if self.domain.periodic[1] && dim == 2 {
            let w = self.domain.hi[1] - self.domain.lo[1];
            dx[1] -= w * (dx[1] / w).round();
        }
        let mut out = *frame;
        for a in 0..dim {
            for k in 0..dim {
                let mut d = 0.0;
                for i in 0..dim {
                    for j in 0..dim {
                        d += gam[k][i][j] * dx[i] * frame[j][a];
                    }
                }
                out[k][a] -= d;
            }
        }
        linalg::gram_schmidt(&mut out, &self.m.metric(y), dim);
        *frame = out;
    }

    fn fast_1d(&self) -> bool {
        self.dim == 1
            && self.flat
            && self.fun.is_empty()
            && (self.phi.is_one() || self.cfg.drift == DriftVariant::Base)
            && self.cfg.drift_switch.is_none()
    }

    /// Simulates one path from `x0`, recording the state at each of `times`
    /// (ascending, rounded to whole steps).
    pub fn simulate_path(&self, x0: &Vec2, times: &[f64], path_index: u64) -> PathRecord {
        self.simulate_path_observed(x0, times, path_index, None)
    }

    pub fn simulate_path_observed(
        &self,
        x0: &Vec2,
        times: &[f64],
        path_index: u64,
        mut observe: Option<&mut dyn FnMut(&PathState)>,
    ) -> PathRecord {
        let mut rng = PathRng::new(self.cfg.seed, path_index);
        let mut st = self.initial_state(x0);
        let mut snapshots = Vec::with_capacity(times.len());
        let fast = self.fast_1d();
        for &t in times {
            let target = (t / self.cfg.h).round() as u64;
            if fast {
                self.run_fast_1d(&mut st, target, &mut rng, &mut observe);
            } else {
                while st.steps < target {
                    let gauss = if self.dim == 2 { [rng.normal(), rng.normal()] } else { [rng.normal(), 0.0] };
                    if let Err(a) = self.step(&mut st, &gauss, x0) {
                        return PathRecord { snapshots, aborted: Some(a) };
                    }
                    if let Some(o) = observe.as_mut() {
                        o(&st);
                    }
                }
            }
            snapshots.push(st.clone());
        }
        PathRecord { snapshots, aborted: None }
    }

    /// Tight loop for 1-D flat charts without registered functionals.
    fn run_fast_1d(&self, st: &mut PathState, target: u64, rng: &mut PathRng, observe: &mut Option<&mut dyn FnMut(&PathState)>) {
        let h = self.cfg.h;
        let s = std::f64::consts::SQRT_2 * h.sqrt();
        let (lo, hi) = match self.m.chart {
            Chart::Interval { length, .. } => (0.0, length),
            _ => unreachable!("fast path is only taken on intervals"),
        };
        let drift = self.m.has_drift();
        let mut x = st.x[0];
        let mut l = st.local_time;
        let mut steps = st.steps;
        while steps < target {
            let mut y = x + s * rng.normal();
            if drift {
                y += self.m.drift(&[x, 0.0])[0] * h;
            }
            if y < lo {
                l += lo - y;
                y = lo;
            } else if y > hi {
                l += y - hi;
                y = hi;
            }
            x = y;
            steps += 1;
            if let Some(o) = observe.as_mut() {
                st.x[0] = x;
                st.local_time = l;
                st.steps = steps;
                st.t = steps as f64 * h;
                o(st);
            }
        }
        st.x[0] = x;
        st.local_time = l;
        st.steps = steps;
        st.t = steps as f64 * h;
    }
}

/// Checks a start point and the time grid before a batch of paths.
pub fn validate_start(m: &ManifoldSpec, x0: &Vec2, times: &[f64]) -> Result<(), SamplerError> {
    if m.boundary_fn(x0) < -m.boundary_tolerance() || !m.domain().contains(x0, m.dim()) {
        return Err(SamplerError::StartOutside(*x0));
    }
    if let Some(&t) = times.iter().find(|&&t| t < 0.0) {
        return Err(SamplerError::NegativeTime(t));
    }
    Ok(())
}

/// Writes the path dump: a header `b"NLPATHS1"`, `u32` dimension, then per
/// step the little-endian `f64` record `t, x[0..dim], l, log_weight`, with
/// each path preceded by its `u64` index and `u64` record count.
pub struct PathDump<W: Write> {
    out: W,
    dim: usize,
}

impl<W: Write> PathDump<W> {
    pub fn new(mut out: W, dim: usize) -> std::io::Result<Self> {
        out.write_all(b"NLPATHS1")?;
        out.write_all(&(dim as u32).to_le_bytes())?;
        Ok(Self { out, dim })
    }

    pub fn write_path(&mut self, index: u64, states: &[(f64, Vec2, f64, f64)]) -> std::io::Result<()> {
        self.out.write_all(&index.to_le_bytes())?;
        self.out.write_all(&(states.len() as u64).to_le_bytes())?;
        for (t, x, l, w) in states {
            self.out.write_all(&t.to_le_bytes())?;
            for v in x.iter().take(self.dim) {
                self.out.write_all(&v.to_le_bytes())?;
            }
            self.out.write_all(&l.to_le_bytes())?;
            self.out.write_all(&w.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// Records one path at every step for [`PathDump`].
pub fn trace_path(s: &Sampler<'_>, x0: &Vec2, t: f64, path_index: u64) -> Vec<(f64, Vec2, f64, f64)> {
    let mut trace = vec![(0.0, *x0, 0.0, 0.0)];
    s.simulate_path_observed(x0, &[t], path_index, Some(&mut |st: &PathState| trace.push((st.t, st.x, st.local_time, st.log_weight))));
    trace
}
