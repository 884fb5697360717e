//! Experiment configuration files.
//!
//! A file holds one or more `[[experiment]]` tables in TOML. Each experiment
//! names a manifold, a weight `φ` and optional sections, one per subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::MIN_PATHS;
use crate::functions::TestFunction;
use crate::geometry::manifold::{stereo_from_polar, Potential};
use crate::geometry::{Chart, GridBoundary, ManifoldSpec, MetricGrid};
use crate::inequalities::{Backend, CheckGrid, KernelCase, Ls1Case, McParams, NegativeCase, OracleParams, QuadParams, Xi};
use crate::linalg::{Vec2, ZERO2};
use crate::phi::PhiField;
use crate::report::digest;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, rename = "experiment")]
    pub experiments: Vec<ExperimentConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub manifold: ManifoldConfig,
    /// Finite-difference step of the geometry.
    #[serde(default)]
    pub h_geo: Option<f64>,
    #[serde(default)]
    pub phi: PhiConfig,
    #[serde(default)]
    pub hypotheses: HypothesisConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub oracle: OracleParams,
    #[serde(default)]
    pub quadrature: QuadParams,
    pub geometry: Option<GeometrySection>,
    pub curvature: Option<CurvatureSection>,
    pub simulate: Option<SimulateSection>,
    pub local_time: Option<LocalTimeSection>,
    pub girsanov: Option<GirsanovSection>,
    pub thm11: Option<GridSection>,
    pub negative: Option<NegativeSection>,
    pub cor12: Option<Cor12Section>,
    pub poincare: Option<FunctionsSection>,
    pub logsobolev: Option<FunctionsSection>,
    pub hwi: Option<FunctionsSection>,
    pub kernel: Option<KernelCase>,
    pub xi: Option<XiSection>,
    pub ls1: Option<Ls1Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldConfig {
    HalfLine {
        #[serde(default)]
        ou: bool,
    },
    Interval {
        length: f64,
        #[serde(default)]
        potential_k: Option<f64>,
    },
    Disk {
        radius: f64,
        #[serde(default)]
        potential_k: Option<f64>,
    },
    Annulus {
        r_in: f64,
        r_out: f64,
    },
    Hemisphere {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        polar: bool,
    },
    Tabulated {
        file: PathBuf,
        boundary: BoundaryConfig,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    Interval,
    Disk { center: Vec2, radius: f64 },
    Slab { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhiConfig {
    #[default]
    One,
    /// `ψ(r) = (r − 1) − (r − 1)²/2` around the origin.
    AnnulusDefault,
    RadialExp {
        #[serde(default)]
        center: Option<Vec2>,
        r0: f64,
        coeffs: Vec<f64>,
    },
    /// `φ` read from the first metric plane of a grid file.
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisConfig {
    /// Curvature constant to use when the grid bound confirms it.
    #[serde(default)]
    pub declared_k: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub strict_class_d: bool,
}

fn default_grid() -> usize {
    crate::phi::DEFAULT_GRID
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        Self { declared_k: None, grid: default_grid(), strict_class_d: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub bias_tol: f64,
    #[serde(default)]
    pub stat_budget: Option<f64>,
}

fn default_n() -> usize {
    10_000
}

fn default_h() -> f64 {
    1e-4
}

fn default_delta() -> f64 {
    crate::estimators::DEFAULT_DELTA
}

impl Default for McConfig {
    fn default() -> Self {
        Self { n: default_n(), h: default_h(), delta: default_delta(), bias_tol: 0.0, stat_budget: None }
    }
}

/// A point in chart coordinates, a line coordinate, or polar angles on a
/// hemisphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Scalar(f64),
    Chart(Vec2),
    Polar { theta: f64, azimuth: f64 },
}

impl PointSpec {
    pub fn resolve(&self, m: &ManifoldSpec) -> Vec2 {
        match *self {
            PointSpec::Scalar(x) => [x, 0.0],
            PointSpec::Chart(x) => x,
            PointSpec::Polar { theta, azimuth } => match m.chart {
                Chart::HemispherePolar { .. } => [theta, azimuth],
                Chart::Hemisphere { .. } => stereo_from_polar(theta, azimuth),
                _ => [theta.cos(), theta.sin()],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub functions: Vec<TestFunction>,
    /// Points per axis of the interior grid.
    #[serde(default = "default_geometry_points")]
    pub points: usize,
    /// Boundary samples for the second fundamental form.
    #[serde(default = "default_boundary_samples")]
    pub boundary_samples: usize,
}

fn default_geometry_points() -> usize {
    11
}

fn default_boundary_samples() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSection {
    #[serde(default = "default_exponents")]
    pub p: Vec<u32>,
}

fn default_exponents() -> Vec<u32> {
    vec![1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub points: Vec<PointSpec>,
    pub times: Vec<f64>,
    pub functions: Vec<TestFunction>,
    /// Paths written by `--dump-paths`.
    #[serde(default = "default_dump")]
    pub dump: usize,
}

fn default_dump() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalTimeSection {
    #[serde(default)]
    pub x0: Option<PointSpec>,
    pub times: Vec<f64>,
    /// Stopping radius; `inf` disables stopping, absent takes half the diameter.
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GirsanovSection {
    pub x0: PointSpec,
    pub t: f64,
    pub functions: Vec<TestFunction>,
    pub radius: f64,
    /// Tilt `Z̃ = c ∇log φ`.
    #[serde(default = "default_tilt")]
    pub tilt: f64,
}

fn default_tilt() -> f64 {
    -std::f64::consts::SQRT_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub functions: Vec<TestFunction>,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub pairs: Vec<(PointSpec, PointSpec)>,
}

impl GridSection {
    pub fn resolve(&self, m: &ManifoldSpec) -> CheckGrid {
        CheckGrid {
            functions: self.functions.clone(),
            points: self.points.iter().map(|p| p.resolve(m)).collect(),
            times: self.times.clone(),
            pairs: self.pairs.iter().map(|(a, b)| (a.resolve(m), b.resolve(m))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegativeSection {
    pub times: Vec<f64>,
    #[serde(default)]
    pub oracle: Option<OracleParams>,
    /// Monte Carlo reproduction with the experiment's `mc` settings.
    #[serde(default)]
    pub monte_carlo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cor12Section {
    #[serde(default)]
    pub backend: Backend,
    pub functions: Vec<TestFunction>,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub pairs: Vec<(PointSpec, PointSpec)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionsSection {
    pub functions: Vec<TestFunction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XiSection {
    pub xi: Xi,
    pub functions: Vec<TestFunction>,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    #[serde(default)]
    pub times: Vec<f64>,
    #[serde(default)]
    pub pairs: Vec<(PointSpec, PointSpec)>,
}

macro_rules! grid_view {
    ($t:ty) => {
        impl $t {
            pub fn grid(&self) -> GridSection {
                GridSection {
                    functions: self.functions.clone(),
                    points: self.points.clone(),
                    times: self.times.clone(),
                    pairs: self.pairs.clone(),
                }
            }
        }
    };
}

grid_view!(Cor12Section);
grid_view!(XiSection);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ls1Section {
    pub functions: Vec<TestFunction>,
    pub points: Vec<PointSpec>,
    pub t: f64,
    #[serde(default = "default_intervals")]
    pub intervals: usize,
}

fn default_intervals() -> usize {
    8
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let errors = file.validate();
        if errors.is_empty() {
            Ok(file)
        } else {
            Err(ConfigError::Invalid(errors))
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut file = Self::parse(&text)?;
        // Relative grid files are resolved against the config's directory.
        if let Some(dir) = path.parent() {
            for e in &mut file.experiments {
                e.rebase(dir);
            }
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    /// Field-level diagnostics; empty when valid.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.experiments.is_empty() {
            errs.push("experiment: at least one [[experiment]] table is required".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, e) in self.experiments.iter().enumerate() {
            let at = format!("experiment[{i}] ({})", e.name);
            if !names.insert(e.name.clone()) {
                errs.push(format!("{at}.name: duplicate experiment name"));
            }
            for msg in e.validate() {
                errs.push(format!("{at}.{msg}"));
            }
        }
        errs
    }
}

fn positive(errs: &mut Vec<String>, field: &str, v: f64) {
    if !(v > 0.0 && v.is_finite()) {
        errs.push(format!("{field}: must be positive and finite, got {v}"));
    }
}

fn times_ok(errs: &mut Vec<String>, field: &str, ts: &[f64], allow_zero: bool) {
    for t in ts {
        if !(t.is_finite() && (*t > 0.0 || (allow_zero && *t == 0.0))) {
            errs.push(format!("{field}: time {t} is not {}", if allow_zero { "nonnegative" } else { "positive" }));
        }
    }
}

impl ExperimentConfig {
    fn rebase(&mut self, dir: &Path) {
        if let ManifoldConfig::Tabulated { file, .. } = &mut self.manifold {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
        if let PhiConfig::Tabulated { file } = &mut self.phi {
            if file.is_relative() {
                *file = dir.join(&*file);
            }
        }
    }

    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        match &self.manifold {
            ManifoldConfig::Interval { length, .. } => positive(&mut errs, "manifold.length", *length),
            ManifoldConfig::Disk { radius, .. } => positive(&mut errs, "manifold.radius", *radius),
            ManifoldConfig::Annulus { r_in, r_out } => {
                positive(&mut errs, "manifold.r_in", *r_in);
                if !(r_out > r_in) {
                    errs.push(format!("manifold.r_out: must exceed r_in, got {r_out} ≤ {r_in}"));
                }
            }
            ManifoldConfig::Hemisphere { radius, .. } => positive(&mut errs, "manifold.radius", *radius),
            _ => {}
        }
        if let PhiConfig::RadialExp { coeffs, .. } = &self.phi {
            if coeffs.is_empty() {
                errs.push("phi.coeffs: at least one coefficient is required".into());
            }
        }
        if self.hypotheses.grid < 8 {
            errs.push(format!("hypotheses.grid: need at least 8 points per axis, got {}", self.hypotheses.grid));
        }
        if self.mc.n < MIN_PATHS {
            errs.push(format!("mc.n: need at least {MIN_PATHS} paths, got {}", self.mc.n));
        }
        positive(&mut errs, "mc.h", self.mc.h);
        positive(&mut errs, "mc.delta", self.mc.delta);
        if !(self.mc.bias_tol >= 0.0) {
            errs.push(format!("mc.bias_tol: must be nonnegative, got {}", self.mc.bias_tol));
        }
        if self.oracle.cells < 8 {
            errs.push(format!("oracle.cells: need at least 8, got {}", self.oracle.cells));
        }
        positive(&mut errs, "oracle.k", self.oracle.k);
        if self.quadrature.panels == 0 || self.quadrature.angular == 0 {
            errs.push("quadrature: panels and angular must be positive".into());
        }
        if let Some(s) = &self.simulate {
            times_ok(&mut errs, "simulate.times", &s.times, false);
            if s.points.is_empty() {
                errs.push("simulate.points: at least one start point is required".into());
            }
        }
        if let Some(s) = &self.local_time {
            times_ok(&mut errs, "local_time.times", &s.times, false);
        }
        if let Some(s) = &self.girsanov {
            positive(&mut errs, "girsanov.t", s.t);
            positive(&mut errs, "girsanov.radius", s.radius);
        }
        for (name, g) in [
            ("thm11", self.thm11.clone()),
            ("cor12", self.cor12.as_ref().map(Cor12Section::grid)),
            ("xi", self.xi.as_ref().map(XiSection::grid)),
        ] {
            if let Some(g) = g {
                times_ok(&mut errs, &format!("{name}.times"), &g.times, name != "thm11");
                if g.functions.is_empty() {
                    errs.push(format!("{name}.functions: at least one function is required"));
                }
            }
        }
        if let Some(n) = &self.negative {
            times_ok(&mut errs, "negative.times", &n.times, false);
        }
        if let Some(k) = &self.kernel {
            times_ok(&mut errs, "kernel.times", &k.times, false);
            if k.nodes.is_empty() {
                errs.push("kernel.nodes: at least one node is required".into());
            }
        }
        if let Some(l) = &self.ls1 {
            positive(&mut errs, "ls1.t", l.t);
            if l.intervals < 2 || l.intervals % 2 == 1 {
                errs.push(format!("ls1.intervals: must be even and at least 2, got {}", l.intervals));
            }
        }
        if let Some(h) = self.h_geo {
            positive(&mut errs, "h_geo", h);
        }
        if let Err(e) = self.build_manifold() {
            errs.push(format!("manifold: {e}"));
        }
        if let Err(e) = self.build_phi() {
            errs.push(format!("phi: {e}"));
        }
        errs
    }

    pub fn build_manifold(&self) -> Result<ManifoldSpec, String> {
        let quad = |k: Option<f64>| k.map(|k| Potential::Quadratic { k }).unwrap_or_default();
        let mut m = match &self.manifold {
            ManifoldConfig::HalfLine { ou } => ManifoldSpec::half_line(*ou),
            ManifoldConfig::Interval { length, potential_k } => ManifoldSpec::interval(*length).with_potential(quad(*potential_k)),
            ManifoldConfig::Disk { radius, potential_k } => ManifoldSpec::disk(*radius).with_potential(quad(*potential_k)),
            ManifoldConfig::Annulus { r_in, r_out } => ManifoldSpec::annulus(*r_in, *r_out),
            ManifoldConfig::Hemisphere { radius, polar } => {
                if *polar {
                    ManifoldSpec::hemisphere_polar(*radius)
                } else {
                    ManifoldSpec::upper_hemisphere(*radius)
                }
            }
            ManifoldConfig::Tabulated { file, boundary } => {
                let grid = read_grid(file)?;
                let boundary = match boundary {
                    BoundaryConfig::Interval => GridBoundary::Interval,
                    BoundaryConfig::Disk { center, radius } => GridBoundary::Disk { center: *center, radius: *radius },
                    BoundaryConfig::Slab { lo, hi } => GridBoundary::Slab { lo: *lo, hi: *hi },
                };
                ManifoldSpec::tabulated(grid, boundary).map_err(|e| e.to_string())?
            }
        };
        if let Some(h) = self.h_geo {
            m.h_geo = h;
        }
        Ok(m)
    }

    pub fn build_phi(&self) -> Result<PhiField, String> {
        Ok(match &self.phi {
            PhiConfig::One => PhiField::One,
            PhiConfig::AnnulusDefault => PhiField::annulus_default(),
            PhiConfig::RadialExp { center, r0, coeffs } => {
                PhiField::RadialExp { center: center.unwrap_or(ZERO2), r0: *r0, coeffs: coeffs.clone() }
            }
            PhiConfig::Tabulated { file } => PhiField::Tabulated(std::sync::Arc::new(read_grid(file)?)),
        })
    }

    pub fn mc_params(&self, seed: u64) -> McParams {
        McParams { n: self.mc.n, h: self.mc.h, seed, delta: self.mc.delta, bias_tol: self.mc.bias_tol, stat_budget: self.mc.stat_budget }
    }

    pub fn negative_case(&self, seed: u64) -> Option<NegativeCase> {
        let n = self.negative.as_ref()?;
        let mut case = NegativeCase { times: n.times.clone(), ..Default::default() };
        if let Some(o) = &n.oracle {
            case.oracle = o.clone();
        }
        if n.monte_carlo {
            case.mc = Some(self.mc_params(seed));
        }
        Some(case)
    }

    pub fn ls1_case(&self, m: &ManifoldSpec) -> Option<Ls1Case> {
        let l = self.ls1.as_ref()?;
        Some(Ls1Case {
            functions: l.functions.clone(),
            points: l.points.iter().map(|p| p.resolve(m)).collect(),
            t: l.t,
            intervals: l.intervals,
        })
    }

    /// Stable hash of the experiment as parsed (before path rebasing).
    pub fn digest(&self) -> String {
        digest(self)
    }
}

fn read_grid(path: &Path) -> Result<MetricGrid, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    MetricGrid::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}
