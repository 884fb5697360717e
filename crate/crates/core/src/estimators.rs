//! Monte Carlo estimators with standard errors.
//!
//! Paths are simulated in fixed-size blocks; per-path values come back in
//! path-index order and are reduced sequentially, so every estimate is a
//! deterministic function of `(seed, n)` whatever the thread count.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::functions::TestFunction;
use crate::geometry::{self, ManifoldSpec};
use crate::linalg::{self, Vec2, ZERO2};
use crate::parallel;
use crate::phi::PhiField;
use crate::sampler::{DriftVariant, Functionals, PathRecord, RunningField, Sampler, SamplerError, SimConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("need at least {min} paths, got {n}")]
    TooFewPaths { n: usize, min: usize },
    #[error("no drift variant realizes tilt coefficient {0}")]
    UnsupportedTilt(f64),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
}

pub const MIN_PATHS: usize = 100;
/// Aborted-path fraction above which an estimate is flagged.
pub const ABORT_LIMIT: f64 = 1e-3;
/// Max weight over mean weight above which heavy tails are flagged.
pub const HEAVY_TAIL_RATIO: f64 = 20.0;

const BLOCK: usize = 256;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
    /// Wall time in seconds (reported in manifests only).
    #[serde(skip)]
    pub elapsed: f64,
    /// Sum of squared deviations from the mean.
    #[serde(skip)]
    pub m2: f64,
    pub aborted: u64,
    /// Largest path weight, for weighted estimators.
    pub max_weight: Option<f64>,
    pub mean_weight: Option<f64>,
}

impl McEstimate {
    /// Welford pass over `values` in order.
    pub fn from_samples(values: &[f64], seed: u64) -> Self {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for (k, &v) in values.iter().enumerate() {
            let d = v - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (v - mean);
        }
        let n = values.len() as u64;
        let mut e = Self { mean, stderr: 0.0, n, seed, elapsed: 0.0, m2, aborted: 0, max_weight: None, mean_weight: None };
        e.stderr = e.compute_stderr();
        e
    }

    /// A noiseless value.
    pub fn exact(value: f64, n: u64, seed: u64) -> Self {
        Self { mean: value, stderr: 0.0, n, seed, elapsed: 0.0, m2: 0.0, aborted: 0, max_weight: None, mean_weight: None }
    }

    fn compute_stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.n - 1) as f64;
        (var / self.n as f64).sqrt()
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Pools two estimates (weighted mean, combined variance).
    pub fn merge(&self, other: &Self) -> Self {
        let n = self.n + other.n;
        if n == 0 {
            return self.clone();
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let d = other.mean - self.mean;
        let mean = self.mean + d * nb / (na + nb);
        let m2 = self.m2 + other.m2 + d * d * na * nb / (na + nb);
        let max_weight = match (self.max_weight, other.max_weight) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let mean_weight = match (self.mean_weight, other.mean_weight) {
            (Some(a), Some(b)) => Some((a * na + b * nb) / (na + nb)),
            (a, b) => a.or(b),
        };
        let mut e = Self {
            mean,
            stderr: 0.0,
            n,
            seed: self.seed,
            elapsed: self.elapsed + other.elapsed,
            m2,
            aborted: self.aborted + other.aborted,
            max_weight,
            mean_weight,
        };
        e.stderr = e.compute_stderr();
        e
    }

    pub fn unreliable(&self) -> bool {
        let total = self.n + self.aborted;
        total > 0 && self.aborted as f64 >= ABORT_LIMIT * total as f64
    }

    pub fn heavy_tail(&self) -> bool {
        match (self.max_weight, self.mean_weight) {
            (Some(mx), Some(mn)) => mx > HEAVY_TAIL_RATIO * mn,
            _ => false,
        }
    }

    /// `|a − b|` measured in combined standard errors.
    pub fn z_score(&self, other: &Self) -> f64 {
        let s = self.stderr.hypot(other.stderr);
        if s == 0.0 {
            if self.mean == other.mean {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - other.mean).abs() / s
        }
    }

    fn with_weights(mut self, weights: &[f64]) -> Self {
        if !weights.is_empty() {
            self.max_weight = Some(weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
            self.mean_weight = Some(weights.iter().sum::<f64>() / weights.len() as f64);
        }
        self
    }
}

/// Extrapolates a bias `c·h^order` away using estimates at `h` and `h/2`.
pub fn richardson(coarse: &McEstimate, fine: &McEstimate, order: f64) -> McEstimate {
    let r = 2f64.powf(order);
    let a = r / (r - 1.0);
    let b = 1.0 / (r - 1.0);
    let mean = a * fine.mean - b * coarse.mean;
    let stderr = (a * fine.stderr).hypot(b * coarse.stderr);
    let mut e = fine.merge(coarse);
    e.mean = mean;
    e.stderr = stderr;
    e
}

/// Runs `n` paths with indices `offset..offset+n` and maps each record.
pub fn map_paths<T: Send>(
    sampler: &Sampler<'_>,
    x0: &Vec2,
    times: &[f64],
    n: usize,
    offset: u64,
    f: impl Fn(&PathRecord) -> T + Sync + Send,
) -> Vec<T> {
    let blocks = n.div_ceil(BLOCK);
    let out = parallel::map_indexed(blocks, |b| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        (lo..hi).map(|i| f(&sampler.simulate_path(x0, times, offset + i as u64))).collect::<Vec<T>>()
    });
    out.into_iter().flatten().collect()
}

fn check_n(n: usize) -> Result<(), EstimatorError> {
    if n < MIN_PATHS {
        Err(EstimatorError::TooFewPaths { n, min: MIN_PATHS })
    } else {
        Ok(())
    }
}

/// Collects per-path values per snapshot, dropping aborted paths.
fn reduce(per_path: Vec<Option<Vec<f64>>>, k: usize, seed: u64, started: Instant) -> Vec<McEstimate> {
    let aborted = per_path.iter().filter(|v| v.is_none()).count() as u64;
    let ok: Vec<Vec<f64>> = per_path.into_iter().flatten().collect();
    (0..k)
        .map(|j| {
            let vals: Vec<f64> = ok.iter().map(|v| v[j]).collect();
            let mut e = McEstimate::from_samples(&vals, seed);
            e.aborted = aborted;
            e.elapsed = started.elapsed().as_secs_f64();
            e
        })
        .collect()
}

/// Shared inputs of the estimators.
#[derive(Debug, Clone)]
pub struct Setup<'a> {
    pub m: &'a ManifoldSpec,
    pub phi: &'a PhiField,
    pub cfg: SimConfig,
    /// First path index, so that disjoint index ranges can be pooled.
    pub offset: u64,
}

impl<'a> Setup<'a> {
    pub fn new(m: &'a ManifoldSpec, phi: &'a PhiField, cfg: SimConfig) -> Self {
        Self { m, phi, cfg, offset: 0 }
    }

    fn sampler(&self, drift: DriftVariant, fun: Functionals) -> Result<Sampler<'a>, EstimatorError> {
        let cfg = SimConfig { drift, ..self.cfg.clone() };
        Ok(Sampler::new(self.m, self.phi, cfg, fun)?)
    }
}

/// `P_t f(x)` at each of `times`.
pub fn estimate_pt_multi(s: &Setup<'_>, f: &TestFunction, x: &Vec2, times: &[f64], n: usize) -> Result<Vec<McEstimate>, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, times)?;
    let started = Instant::now();
    if let TestFunction::Constant { value } = f {
        return Ok(times.iter().map(|_| McEstimate::exact(*value, n as u64, s.cfg.seed)).collect());
    }
    let sampler = s.sampler(s.cfg.drift, Functionals::default())?;
    let per = map_paths(&sampler, x, times, n, s.offset, |r| {
        r.terminal()?;
        Some(r.snapshots.iter().map(|st| f.eval(s.m, &st.x)).collect::<Vec<f64>>())
    });
    Ok(reduce(per, times.len(), s.cfg.seed, started))
}

/// `P_t f(x) = E^x f(X_t)`.
pub fn estimate_pt(s: &Setup<'_>, f: &TestFunction, x: &Vec2, t: f64, n: usize) -> Result<McEstimate, EstimatorError> {
    Ok(estimate_pt_multi(s, f, x, &[t], n)?.remove(0))
}

/// `P_t g(x)` for an arbitrary bounded field `g`.
pub fn estimate_pt_field(
    s: &Setup<'_>,
    g: &(dyn Fn(&Vec2) -> f64 + Sync),
    x: &Vec2,
    times: &[f64],
    n: usize,
) -> Result<Vec<McEstimate>, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, times)?;
    let started = Instant::now();
    let sampler = s.sampler(s.cfg.drift, Functionals::default())?;
    let per = map_paths(&sampler, x, times, n, s.offset, |r| {
        r.terminal()?;
        Some(r.snapshots.iter().map(|st| g(&st.x)).collect::<Vec<f64>>())
    });
    Ok(reduce(per, times.len(), s.cfg.seed, started))
}

/// Means of several fields at `X_t` over the same paths, with their sample
/// covariance (for delta-method errors of nonlinear combinations).
#[derive(Debug, Clone, Serialize)]
pub struct JointEstimate {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub n: u64,
    pub aborted: u64,
}

impl JointEstimate {
    /// Standard error of `Σ_i a_i · mean_i`.
    pub fn stderr_of(&self, a: &[f64]) -> f64 {
        let mut v = 0.0;
        for (i, ai) in a.iter().enumerate() {
            for (j, aj) in a.iter().enumerate() {
                v += ai * self.cov[i][j] * aj;
            }
        }
        (v.max(0.0) / self.n.max(1) as f64).sqrt()
    }

    pub fn marginal(&self, i: usize, seed: u64) -> McEstimate {
        let n = self.n;
        McEstimate {
            mean: self.mean[i],
            stderr: self.stderr_of(&(0..self.mean.len()).map(|j| if j == i { 1.0 } else { 0.0 }).collect::<Vec<_>>()),
            n,
            seed,
            elapsed: 0.0,
            m2: self.cov[i][i] * (n.max(2) - 1) as f64,
            aborted: self.aborted,
            max_weight: None,
            mean_weight: None,
        }
    }
}

pub type Field<'f> = &'f (dyn Fn(&Vec2) -> f64 + Sync);

pub fn estimate_joint(s: &Setup<'_>, fields: &[Field<'_>], x: &Vec2, t: f64, n: usize) -> Result<JointEstimate, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, &[t])?;
    let sampler = s.sampler(s.cfg.drift, Functionals::default())?;
    let per = map_paths(&sampler, x, &[t], n, s.offset, |r| {
        let st = r.terminal()?;
        Some(fields.iter().map(|f| f(&st.x)).collect::<Vec<f64>>())
    });
    let aborted = per.iter().filter(|v| v.is_none()).count() as u64;
    let rows: Vec<Vec<f64>> = per.into_iter().flatten().collect();
    let k = fields.len();
    let cnt = rows.len().max(1) as f64;
    let mean: Vec<f64> = (0..k).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / cnt).collect();
    let mut cov = vec![vec![0.0; k]; k];
    for r in &rows {
        for a in 0..k {
            for b in 0..k {
                cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    let denom = (cnt - 1.0).max(1.0);
    cov.iter_mut().flatten().for_each(|v| *v /= denom);
    Ok(JointEstimate { mean, cov, n: rows.len() as u64, aborted })
}

/// Estimate of `|∇P_t f(x)|_g` with its difference stencil.
#[derive(Debug, Clone, Serialize)]
pub struct GradEstimate {
    pub norm: McEstimate,
    /// Mean difference quotient per direction.
    pub components: Vec<f64>,
    /// Differencing ran along `∂M` (boundary start point).
    pub tangential: bool,
    /// A stencil point left `M`, so one-sided differences were used.
    pub one_sided: bool,
}

pub const DEFAULT_DELTA: f64 = 1e-3;

/// `|∇P_t f(x)|` by central differences with common random numbers: both
/// stencil points of a direction reuse the same path streams.
pub fn estimate_grad_pt(s: &Setup<'_>, f: &TestFunction, x: &Vec2, t: f64, n: usize, delta: f64) -> Result<GradEstimate, EstimatorError> {
    estimate_grad_pt_multi(s, f, x, &[t], n, delta).map(|mut v| v.remove(0))
}

pub fn estimate_grad_pt_multi(
    s: &Setup<'_>,
    f: &TestFunction,
    x: &Vec2,
    times: &[f64],
    n: usize,
    delta: f64,
) -> Result<Vec<GradEstimate>, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, times)?;
    let started = Instant::now();
    let m = s.m;
    let dim = m.dim();
    let on_boundary = m.boundary_fn(x).abs() <= 1e-9 * m.domain().diameter(dim);
    let g = m.metric(x);

    // Stencil: (plus, minus, chart direction of unit parameter, spacing)
    let mut stencils: Vec<(Vec2, Vec2, f64)> = Vec::new();
    let mut dirs: Vec<Vec2> = Vec::new();
    let mut one_sided = false;
    if on_boundary {
        if dim == 1 {
            // Tangent space of the boundary is trivial: NP_t f = 0.
            let e = McEstimate::exact(0.0, n as u64, s.cfg.seed);
            return Ok(times
                .iter()
                .map(|_| GradEstimate { norm: e.clone(), components: vec![0.0], tangential: true, one_sided: false })
                .collect());
        }
        let tan = geometry::unit_tangent(m, x)?;
        let step = |sgn: f64| {
            let y = linalg::add(x, &linalg::scale(&tan, sgn * delta));
            if m.boundary_fn(&y) > 0.0 {
                // Push outward points of a convex piece back to the boundary.
                let n_out = linalg::scale(&crate::phi::boundary_normal(m, &y).unwrap_or(ZERO2), -1.0);
                let far = linalg::add(&y, &linalg::scale(&n_out, 10.0 * delta));
                m.project_to_boundary(&far).0
            } else {
                m.project_to_boundary(&y).0
            }
        };
        let (p, q) = (step(1.0), step(-1.0));
        let spacing = m.distance(&p, &q);
        stencils.push((p, q, spacing));
        dirs.push(tan);
    } else {
        for i in 0..dim {
            let mut e = ZERO2;
            e[i] = delta;
            let (p, q) = (linalg::add(x, &e), linalg::sub(x, &e));
            let (p, q, sp) = match (m.contains(&p), m.contains(&q)) {
                (true, true) => (p, q, 2.0 * delta),
                (true, false) => {
                    one_sided = true;
                    (p, *x, delta)
                }
                _ => {
                    one_sided = true;
                    (*x, q, delta)
                }
            };
            stencils.push((p, q, sp));
            let mut d = ZERO2;
            d[i] = 1.0;
            dirs.push(d);
        }
    }

    let sampler = s.sampler(s.cfg.drift, Functionals::default())?;
    let k = stencils.len();
    // Per path and time: difference quotient per direction.
    let per_dir: Vec<Vec<Option<Vec<f64>>>> = stencils
        .iter()
        .map(|(p, q, sp)| {
            let a = map_paths(&sampler, p, times, n, s.offset, |r| {
                r.terminal()?;
                Some(r.snapshots.iter().map(|st| f.eval(m, &st.x)).collect::<Vec<f64>>())
            });
            let b = map_paths(&sampler, q, times, n, s.offset, |r| {
                r.terminal()?;
                Some(r.snapshots.iter().map(|st| f.eval(m, &st.x)).collect::<Vec<f64>>())
            });
            a.into_iter()
                .zip(b)
                .map(|(u, v)| match (u, v) {
                    (Some(u), Some(v)) => Some(u.iter().zip(&v).map(|(a, b)| (a - b) / sp).collect()),
                    _ => None,
                })
                .collect()
        })
        .collect();

    let mut out = Vec::with_capacity(times.len());
    for j in 0..times.len() {
        // Paths valid in every direction.
        let rows: Vec<Vec<f64>> = (0..n)
            .filter_map(|i| {
                let mut row = Vec::with_capacity(k);
                for d in &per_dir {
                    row.push(d[i].as_ref()?[j]);
                }
                Some(row)
            })
            .collect();
        let aborted = (n - rows.len()) as u64;
        let cnt = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..k).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / cnt).collect();
        let mut cov = vec![vec![0.0; k]; k];
        for r in &rows {
            for a in 0..k {
                for b in 0..k {
                    cov[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        let denom = (cnt - 1.0).max(1.0);
        for row in cov.iter_mut() {
            for v in row.iter_mut() {
                *v /= denom;
            }
        }
        // Quadratic form A giving |∇P f|² = Dᵀ A D.
        let a_mat: Vec<Vec<f64>> = if on_boundary {
            vec![vec![1.0]]
        } else {
            let ginv = linalg::inverse(&g, dim).unwrap_or(linalg::IDENTITY2);
            (0..k).map(|a| (0..k).map(|b| ginv[a][b]).collect()).collect()
        };
        let quad = |v: &[f64], w: &[f64]| -> f64 {
            let mut s = 0.0;
            for a in 0..k {
                for b in 0..k {
                    s += v[a] * a_mat[a][b] * w[b];
                }
            }
            s
        };
        let norm = quad(&mean, &mean).max(0.0).sqrt();
        let var = if norm > 0.0 {
            let grad: Vec<f64> = (0..k).map(|a| (0..k).map(|b| a_mat[a][b] * mean[b]).sum::<f64>() / norm).collect();
            let mut v = 0.0;
            for a in 0..k {
                for b in 0..k {
                    v += grad[a] * cov[a][b] * grad[b];
                }
            }
            v
        } else {
            (0..k).map(|a| (0..k).map(|b| a_mat[a][b] * cov[b][a]).sum::<f64>()).sum::<f64>()
        };
        let nn = rows.len() as u64;
        let est = McEstimate {
            mean: norm,
            stderr: (var.max(0.0) / cnt).sqrt(),
            n: nn,
            seed: s.cfg.seed,
            elapsed: started.elapsed().as_secs_f64(),
            m2: var * denom,
            aborted,
            max_weight: None,
            mean_weight: None,
        };
        out.push(GradEstimate { norm: est, components: mean, tangential: on_boundary, one_sided });
    }
    let _ = dirs;
    Ok(out)
}

/// Curvature lower bound: a constant or a bounded field.
#[derive(Clone)]
pub enum KField {
    Constant(f64),
    Field(Arc<dyn Fn(&Vec2) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for KField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KField::Constant(k) => write!(f, "Constant({k})"),
            KField::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl KField {
    fn running(&self) -> Option<RunningField> {
        match self {
            KField::Constant(_) => None,
            KField::Field(w) => Some(RunningField::Field(w.clone())),
        }
    }
}

/// `(1/φ(x)) E[(φ|∇f|)(X_t) exp(−√2 ∫⟨u^{-1}∇log φ, dB⟩ − ∫(K + |∇log φ|²) ds)]`
/// over base-drift paths.
pub fn rhs_thm_weighted(
    s: &Setup<'_>,
    k: &KField,
    f: &TestFunction,
    x: &Vec2,
    times: &[f64],
    n: usize,
) -> Result<Vec<McEstimate>, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, times)?;
    let started = Instant::now();
    let mut fun = Functionals { stoch_integral: !s.phi.is_one(), ..Default::default() };
    if !s.phi.is_one() {
        fun.running.push(RunningField::GradLogSq);
    }
    fun.running.extend(k.running());
    let sampler = s.sampler(DriftVariant::Base, fun)?;
    let m = s.m;
    let phi0 = s.phi.value(x);
    let has_field = matches!(k, KField::Field(_));
    let per = map_paths(&sampler, x, times, n, s.offset, |r| {
        r.terminal()?;
        Some(
            r.snapshots
                .iter()
                .map(|st| {
                    let mut expo = -std::f64::consts::SQRT_2 * st.stoch_integral;
                    let mut idx = 0;
                    if !s.phi.is_one() {
                        expo -= st.running[0];
                        idx = 1;
                    }
                    expo -= match k {
                        KField::Constant(c) => c * st.t,
                        KField::Field(_) if has_field => st.running[idx],
                        KField::Field(_) => 0.0,
                    };
                    let w = expo.exp();
                    (s.phi.value(&st.x) * f.grad_norm(m, &st.x) * w / phi0, w)
                })
                .collect::<Vec<(f64, f64)>>(),
        )
    });
    Ok(reduce_weighted(per, times.len(), s.cfg.seed, started))
}

fn reduce_weighted(per: Vec<Option<Vec<(f64, f64)>>>, k: usize, seed: u64, started: Instant) -> Vec<McEstimate> {
    let aborted = per.iter().filter(|v| v.is_none()).count() as u64;
    let ok: Vec<Vec<(f64, f64)>> = per.into_iter().flatten().collect();
    (0..k)
        .map(|j| {
            let vals: Vec<f64> = ok.iter().map(|v| v[j].0).collect();
            let ws: Vec<f64> = ok.iter().map(|v| v[j].1).collect();
            let mut e = McEstimate::from_samples(&vals, seed).with_weights(&ws);
            e.aborted = aborted;
            e.elapsed = started.elapsed().as_secs_f64();
            e
        })
        .collect()
}

/// `(1/φ(x)) E[(φ|∇f|)(X^φ_t) exp(−∫K(X^φ_s) ds)]` over paths with drift `Z − 2∇log φ`.
pub fn rhs_thm_tilted(
    s: &Setup<'_>,
    k: &KField,
    f: &TestFunction,
    x: &Vec2,
    times: &[f64],
    n: usize,
) -> Result<Vec<McEstimate>, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, times)?;
    let started = Instant::now();
    let fun = Functionals { running: k.running().into_iter().collect(), ..Default::default() };
    let sampler = s.sampler(DriftVariant::Phi, fun)?;
    let m = s.m;
    let phi0 = s.phi.value(x);
    let per = map_paths(&sampler, x, times, n, s.offset, |r| {
        r.terminal()?;
        Some(
            r.snapshots
                .iter()
                .map(|st| {
                    let int_k = match k {
                        KField::Constant(c) => c * st.t,
                        KField::Field(_) => st.running[0],
                    };
                    let w = (-int_k).exp();
                    (s.phi.value(&st.x) * f.grad_norm(m, &st.x) * w / phi0, w)
                })
                .collect::<Vec<(f64, f64)>>(),
        )
    });
    Ok(reduce_weighted(per, times.len(), s.cfg.seed, started))
}

/// `E l_{t∧σ_r}` from a boundary point; `r = None` takes half the diameter of
/// the chart box restricted to `M`.
pub fn local_time_mean(s: &Setup<'_>, x: &Vec2, times: &[f64], n: usize, r: Option<f64>) -> Result<Vec<McEstimate>, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, times)?;
    let started = Instant::now();
    let radius = r.unwrap_or_else(|| 0.5 * manifold_diameter(s.m));
    let fun = Functionals { exit_radii: vec![radius], ..Default::default() };
    // Exit tracking is only needed when the ball can actually be left.
    let reachable = s.m.grid_points(33).iter().any(|p| s.m.distance(x, p) >= radius);
    let fun = if reachable { fun } else { Functionals::default() };
    let sampler = s.sampler(s.cfg.drift, fun)?;
    let per = map_paths(&sampler, x, times, n, s.offset, |rec| {
        rec.terminal()?;
        Some(rec.snapshots.iter().map(|st| if reachable { st.stopped_local_time(0) } else { st.local_time }).collect::<Vec<f64>>())
    });
    Ok(reduce(per, times.len(), s.cfg.seed, started))
}

/// Largest distance between sampled points of `M`.
pub fn manifold_diameter(m: &ManifoldSpec) -> f64 {
    let pts = m.boundary_points(64);
    let base = m.base_point();
    let mut d: f64 = 0.0;
    for p in &pts {
        for q in &pts {
            d = d.max(m.distance(p, q));
        }
        d = d.max(2.0 * m.distance(&base, p));
    }
    if m.dim() == 1 {
        let dom = m.domain();
        let pts = m.grid_points(64);
        let lo = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min).max(dom.lo[0]);
        let hi = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max).min(dom.hi[0]);
        d = m.distance(&[lo, 0.0], &[hi, 0.0]);
    }
    d
}

/// A path functional compared under the weighted and tilted measures.
#[derive(Debug, Clone, Serialize)]
pub enum PathFunctional {
    Terminal(TestFunction),
    TimeIntegral(TestFunction),
    /// `1{σ_r > t}`
    Survival(f64),
}

impl PathFunctional {
    pub fn name(&self) -> String {
        match self {
            PathFunctional::Terminal(f) => format!("terminal[{}]", f.name()),
            PathFunctional::TimeIntegral(f) => format!("integral[{}]", f.name()),
            PathFunctional::Survival(r) => format!("survival[r={r}]"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GirsanovComparison {
    pub functional: String,
    pub weighted: McEstimate,
    pub tilted: McEstimate,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GirsanovReport {
    /// `E[R]`, which should be 1.
    pub mean_weight: McEstimate,
    pub comparisons: Vec<GirsanovComparison>,
}

/// Compares `E[F(X) R]` (base drift, tilt `Z̃ = c∇log φ`) with `E[F(Y)]`
/// where `Y` has drift `Z + √2 Z̃`.
pub fn girsanov_equivalence(
    s: &Setup<'_>,
    tilt_coefficient: f64,
    x: &Vec2,
    t: f64,
    functionals: &[PathFunctional],
    n: usize,
) -> Result<GirsanovReport, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, &[t])?;
    let started = Instant::now();
    let mut fun = Functionals { tilt: Some(tilt_coefficient), ..Default::default() };
    for f in functionals {
        match f {
            PathFunctional::TimeIntegral(g) => fun.running.push(RunningField::Function(g.clone())),
            PathFunctional::Survival(r) => fun.exit_radii.push(*r),
            PathFunctional::Terminal(_) => {}
        }
    }
    let tilted_drift = match tilt_coefficient {
        c if (c + std::f64::consts::SQRT_2).abs() < 1e-12 => DriftVariant::Phi,
        c if (c + 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12 => DriftVariant::Phi4,
        0.0 => DriftVariant::Base,
        c => return Err(EstimatorError::UnsupportedTilt(c)),
    };
    let eval = |st: &crate::sampler::PathState| -> Vec<f64> {
        let (mut ri, mut ei) = (0, 0);
        functionals
            .iter()
            .map(|f| match f {
                PathFunctional::Terminal(g) => g.eval(s.m, &st.x),
                PathFunctional::TimeIntegral(_) => {
                    ri += 1;
                    st.running[ri - 1]
                }
                PathFunctional::Survival(_) => {
                    ei += 1;
                    if st.survived(ei - 1) {
                        1.0
                    } else {
                        0.0
                    }
                }
            })
            .collect()
    };
    let base = s.sampler(DriftVariant::Base, fun.clone())?;
    let weighted = map_paths(&base, x, &[t], n, s.offset, |r| {
        let st = r.terminal()?;
        let w = st.log_weight.exp();
        let mut v: Vec<f64> = eval(st).into_iter().map(|a| a * w).collect();
        v.push(w);
        Some(v)
    });
    let tilted_fun = Functionals { tilt: None, ..fun };
    let tilted = s.sampler(tilted_drift, tilted_fun)?;
    let plain = map_paths(&tilted, x, &[t], n, s.offset, |r| Some(eval(r.terminal()?)));

    let k = functionals.len();
    let w_est = reduce(weighted, k + 1, s.cfg.seed, started);
    let t_est = reduce(plain, k, s.cfg.seed, started);
    let comparisons = functionals
        .iter()
        .enumerate()
        .map(|(j, f)| GirsanovComparison {
            functional: f.name(),
            weighted: w_est[j].clone(),
            tilted: t_est[j].clone(),
            z: w_est[j].z_score(&t_est[j]),
        })
        .collect();
    Ok(GirsanovReport { mean_weight: w_est[k].clone(), comparisons })
}

/// `E[g(Y_t)]` for the composite path that follows `Z` on `[0, s]` and
/// `Z − 4∇log φ` on `[s, t]`, i.e. `P_s P̄^φ_{t−s} g`.
pub fn estimate_composite(
    s: &Setup<'_>,
    g: &(dyn Fn(&Vec2) -> f64 + Sync),
    x: &Vec2,
    switch: f64,
    t: f64,
    n: usize,
) -> Result<McEstimate, EstimatorError> {
    check_n(n)?;
    crate::sampler::validate_start(s.m, x, &[t])?;
    let started = Instant::now();
    let cfg = SimConfig { drift: DriftVariant::Base, drift_switch: Some((switch, DriftVariant::Phi4)), ..s.cfg.clone() };
    let sampler = Sampler::new(s.m, s.phi, cfg, Functionals::default())?;
    let per = map_paths(&sampler, x, &[t], n, s.offset, |r| Some(vec![g(&r.terminal()?.x)]));
    Ok(reduce(per, 1, s.cfg.seed, started).remove(0))
}
