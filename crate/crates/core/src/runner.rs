//! Subcommand execution and output files.
//!
//! Every subcommand writes `results.csv` (one row per check), `reports.jsonl`,
//! its own tables as CSV and `manifest.json`. Everything except the manifest
//! is a function of the configuration and seed alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ConfigFile, ExperimentConfig, ManifoldConfig};
use crate::estimators::{self, McEstimate, PathFunctional, Setup};
use crate::geometry::{self, ManifoldSpec};
use crate::inequalities::{self as ineq, McParams, Problem, XiCase};
use crate::linalg::{self, Vec2};
use crate::parallel;
use crate::phi::{self, PhiField};
use crate::report::{CheckReport, Hypotheses, Verdict};
use crate::sampler::{self, Functionals, PathDump, Sampler, SimConfig};

/// Relative tolerance of the Γ₂ identity.
pub const GAMMA2_TOL: f64 = 1e-4;
/// Absolute tolerance of Ricci curvature and second fundamental form.
pub const CATALOG_TOL: f64 = 1e-3;
/// Relative tolerance of the reflected Brownian local time.
pub const LOCAL_TIME_TOL: f64 = 0.05;
/// Weak order of the reflection scheme, used by `--richardson`.
pub const SCHEME_ORDER: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{subcommand}: no experiment has a [{section}] section")]
    NothingToRun { subcommand: &'static str, section: &'static str },
    #[error("experiment {name}, {stage}: {message}")]
    Experiment { name: String, stage: &'static str, message: String },
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    /// Process exit code: 2 for configuration problems.
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subcommand {
    GeometryCheck,
    ClassD,
    CurvatureBound,
    Simulate,
    LocalTime,
    GirsanovTest,
    VerifyThm11,
    VerifyCor12,
    VerifyPoincare,
    VerifyLogsobolev,
    VerifyHwi,
    VerifyKernel,
    VerifyXi,
    VerifyLs1,
    All,
}

impl Subcommand {
    pub const ALL: [Subcommand; 15] = [
        Subcommand::GeometryCheck,
        Subcommand::ClassD,
        Subcommand::CurvatureBound,
        Subcommand::Simulate,
        Subcommand::LocalTime,
        Subcommand::GirsanovTest,
        Subcommand::VerifyThm11,
        Subcommand::VerifyCor12,
        Subcommand::VerifyPoincare,
        Subcommand::VerifyLogsobolev,
        Subcommand::VerifyHwi,
        Subcommand::VerifyKernel,
        Subcommand::VerifyXi,
        Subcommand::VerifyLs1,
        Subcommand::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::GeometryCheck => "geometry-check",
            Subcommand::ClassD => "class-d",
            Subcommand::CurvatureBound => "curvature-bound",
            Subcommand::Simulate => "simulate",
            Subcommand::LocalTime => "local-time",
            Subcommand::GirsanovTest => "girsanov-test",
            Subcommand::VerifyThm11 => "verify-thm11",
            Subcommand::VerifyCor12 => "verify-cor12",
            Subcommand::VerifyPoincare => "verify-poincare",
            Subcommand::VerifyLogsobolev => "verify-logsobolev",
            Subcommand::VerifyHwi => "verify-hwi",
            Subcommand::VerifyKernel => "verify-kernel",
            Subcommand::VerifyXi => "verify-xi",
            Subcommand::VerifyLs1 => "verify-ls1",
            Subcommand::All => "all",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Config section that enables the subcommand.
    fn section(self) -> &'static str {
        match self {
            Subcommand::GeometryCheck => "geometry",
            Subcommand::ClassD | Subcommand::CurvatureBound => "curvature",
            Subcommand::Simulate => "simulate",
            Subcommand::LocalTime => "local_time",
            Subcommand::GirsanovTest => "girsanov",
            Subcommand::VerifyThm11 => "thm11",
            Subcommand::VerifyCor12 => "cor12",
            Subcommand::VerifyPoincare => "poincare",
            Subcommand::VerifyLogsobolev => "logsobolev",
            Subcommand::VerifyHwi => "hwi",
            Subcommand::VerifyKernel => "kernel",
            Subcommand::VerifyXi => "xi",
            Subcommand::VerifyLs1 => "ls1",
            Subcommand::All => "",
        }
    }

    fn enabled(self, e: &ExperimentConfig) -> bool {
        match self {
            Subcommand::GeometryCheck => e.geometry.is_some(),
            Subcommand::ClassD | Subcommand::CurvatureBound => e.curvature.is_some(),
            Subcommand::Simulate => e.simulate.is_some(),
            Subcommand::LocalTime => e.local_time.is_some(),
            Subcommand::GirsanovTest => e.girsanov.is_some(),
            Subcommand::VerifyThm11 => e.thm11.is_some() || e.negative.is_some(),
            Subcommand::VerifyCor12 => e.cor12.is_some(),
            Subcommand::VerifyPoincare => e.poincare.is_some(),
            Subcommand::VerifyLogsobolev => e.logsobolev.is_some(),
            Subcommand::VerifyHwi => e.hwi.is_some(),
            Subcommand::VerifyKernel => e.kernel.is_some(),
            Subcommand::VerifyXi => e.xi.is_some(),
            Subcommand::VerifyLs1 => e.ls1.is_some(),
            Subcommand::All => false,
        }
    }

    fn stages(self) -> Vec<Subcommand> {
        match self {
            Subcommand::All => Self::ALL[..Self::ALL.len() - 1].to_vec(),
            s => vec![s],
        }
    }
}

impl std::fmt::Display for Subcommand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the seed of every experiment.
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Re-run simulations at `h/2` and extrapolate the scheme bias away.
    pub richardson: bool,
    pub strict_class_d: bool,
    pub dump_paths: bool,
}

/// One line of `results.csv` and `reports.jsonl`.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub experiment: String,
    pub seed: u64,
    #[serde(flatten)]
    pub report: CheckReport,
}

#[derive(Debug, Clone, Serialize)]
struct StageTiming {
    experiment: String,
    stage: &'static str,
    wall_seconds: f64,
    checks: usize,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub rows: Vec<Row>,
    /// Human-readable lines from the diagnostic subcommands.
    pub notes: Vec<String>,
    tables: BTreeMap<String, Table>,
    timings: Vec<StageTiming>,
}

impl Outcome {
    /// 0 when every positive check is not VIOLATED and every negative one is.
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().all(|r| r.report.acceptable()) {
            0
        } else {
            1
        }
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.rows.iter().filter(|r| r.report.verdict == v).count()
    }

    pub fn summary(&self, sub: Subcommand) -> String {
        let negatives = self.rows.iter().filter(|r| r.report.negative).count();
        let bad = self.rows.iter().filter(|r| !r.report.acceptable()).count();
        let mut line = format!(
            "{sub}: {} checks, {} HOLDS, {} VIOLATED, {} INCONCLUSIVE",
            self.rows.len(),
            self.count(Verdict::Holds),
            self.count(Verdict::Violated),
            self.count(Verdict::Inconclusive)
        );
        if negatives > 0 {
            let _ = write!(line, " ({negatives} designated negative)");
        }
        line.push_str(if bad == 0 { " -> OK" } else { " -> FAIL" });
        if bad > 0 {
            let _ = write!(line, " ({bad} unexpected)");
        }
        line
    }

    pub fn tables(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }
}

#[derive(Debug)]
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e15)`.
fn num(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        "nan".into()
    } else if a == 0.0 || a.is_infinite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn point(x: &Vec2) -> [String; 2] {
    [num(x[0]), num(x[1])]
}

struct Ctx<'a> {
    e: &'a ExperimentConfig,
    m: ManifoldSpec,
    phi: PhiField,
    seed: u64,
    digest: String,
    opts: &'a RunOptions,
}

impl Ctx<'_> {
    fn problem(&self) -> Problem<'_> {
        Problem {
            m: &self.m,
            phi: &self.phi,
            declared_k: self.e.hypotheses.declared_k,
            grid: self.e.hypotheses.grid,
            strict_class_d: self.e.hypotheses.strict_class_d || self.opts.strict_class_d,
        }
    }

    fn mc(&self) -> McParams {
        self.e.mc_params(self.seed)
    }

    fn setup(&self, h: f64) -> Setup<'_> {
        Setup::new(&self.m, &self.phi, SimConfig::new(h, self.seed))
    }

    fn table(&self, out: &mut Outcome, name: &str, header: &[&'static str], cells: Vec<String>) {
        let t = out.tables.entry(name.to_string()).or_insert_with(|| {
            let mut h = vec!["experiment", "config_digest", "seed"];
            h.extend_from_slice(header);
            Table { header: h, rows: Vec::new() }
        });
        let mut row = vec![self.e.name.clone(), self.digest.clone(), self.seed.to_string()];
        row.extend(cells);
        t.rows.push(row);
    }

    /// `P_t f` at each time, extrapolated in `h` under `--richardson`.
    fn estimate(&self, est: impl Fn(&Setup<'_>) -> Result<Vec<McEstimate>, estimators::EstimatorError>) -> Result<Vec<McEstimate>, String> {
        let h = self.e.mc.h;
        let coarse = est(&self.setup(h)).map_err(|e| e.to_string())?;
        if !self.opts.richardson {
            return Ok(coarse);
        }
        let fine = est(&self.setup(0.5 * h)).map_err(|e| e.to_string())?;
        Ok(coarse.iter().zip(&fine).map(|(c, f)| estimators::richardson(c, f, SCHEME_ORDER)).collect())
    }
}

/// A numerical identity or catalog value: `value ≤ bound` decides.
fn bound_report(id: &str, case: String, value: f64, bound: f64) -> CheckReport {
    let mut r = CheckReport::assess(id, case, value, bound, 0.0, 0.0, 0.0, Hypotheses::default());
    if r.verdict == Verdict::Inconclusive && !value.is_nan() {
        r.verdict = Verdict::Holds;
    }
    r
}

/// Agreement of two estimates within the given tolerances.
fn agreement(id: &str, case: String, a: f64, b: f64, stat: f64, oracle: f64) -> CheckReport {
    let mut r = CheckReport::assess(id, case, (a - b).abs(), 0.0, stat, oracle, 0.0, Hypotheses::default());
    if r.verdict == Verdict::Inconclusive && !(a - b).is_nan() {
        r.verdict = Verdict::Holds;
    }
    r
}

/// Loads, runs and writes all outputs.
pub fn run_file(path: &Path, sub: Subcommand, opts: &RunOptions) -> Result<Outcome, RunError> {
    let file = ConfigFile::load(path)?;
    let outcome = run(&file, sub, opts)?;
    write_outputs(&file, sub, opts, &outcome)?;
    Ok(outcome)
}

/// Runs `sub` on every experiment that enables it.
pub fn run(file: &ConfigFile, sub: Subcommand, opts: &RunOptions) -> Result<Outcome, RunError> {
    let stages = sub.stages();
    if sub != Subcommand::All && !file.experiments.iter().any(|e| sub.enabled(e)) {
        return Err(RunError::NothingToRun { subcommand: sub.name(), section: sub.section() });
    }
    let mut out = Outcome::default();
    for e in &file.experiments {
        let fail = |stage: &'static str, message: String| RunError::Experiment { name: e.name.clone(), stage, message };
        let ctx = Ctx {
            e,
            m: e.build_manifold().map_err(|m| fail("manifold", m))?,
            phi: e.build_phi().map_err(|m| fail("phi", m))?,
            seed: opts.seed.unwrap_or(e.seed),
            digest: e.digest(),
            opts,
        };
        for stage in stages.iter().copied().filter(|s| s.enabled(e)) {
            let started = Instant::now();
            let before = out.rows.len();
            let reports = run_stage(&ctx, stage, &mut out).map_err(|m| fail(stage.name(), m))?;
            out.rows.extend(reports.into_iter().map(|mut r| {
                r.config_digest = ctx.digest.clone();
                Row { experiment: e.name.clone(), seed: ctx.seed, report: r }
            }));
            out.timings.push(StageTiming {
                experiment: e.name.clone(),
                stage: stage.name(),
                wall_seconds: started.elapsed().as_secs_f64(),
                checks: out.rows.len() - before,
            });
        }
    }
    Ok(out)
}

fn run_stage(ctx: &Ctx<'_>, stage: Subcommand, out: &mut Outcome) -> Result<Vec<CheckReport>, String> {
    let e = ctx.e;
    let pb = ctx.problem();
    let s = |r: Result<Vec<CheckReport>, ineq::InequalityError>| r.map_err(|e| e.to_string());
    match stage {
        Subcommand::GeometryCheck => geometry_check(ctx, out),
        Subcommand::ClassD => class_d(ctx, out),
        Subcommand::CurvatureBound => curvature_bound(ctx, out),
        Subcommand::Simulate => simulate(ctx, out),
        Subcommand::LocalTime => local_time(ctx, out),
        Subcommand::GirsanovTest => girsanov(ctx, out),
        Subcommand::VerifyThm11 => {
            let mut reports = Vec::new();
            if let Some(g) = &e.thm11 {
                reports.extend(s(ineq::verify_gradient_thm11(&pb, &g.resolve(&ctx.m), &ctx.mc()))?);
            }
            if let Some(case) = e.negative_case(ctx.seed) {
                reports.extend(s(ineq::negative_thm11_annulus(&case))?);
            }
            Ok(reports)
        }
        Subcommand::VerifyCor12 => {
            let c = e.cor12.as_ref().expect("enabled");
            s(ineq::verify_cor12(&pb, &c.grid().resolve(&ctx.m), c.backend, &ctx.mc(), &e.oracle))
        }
        Subcommand::VerifyPoincare => s(ineq::verify_poincare(&pb, &e.poincare.as_ref().expect("enabled").functions, &e.quadrature)),
        Subcommand::VerifyLogsobolev => s(ineq::verify_logsobolev(&pb, &e.logsobolev.as_ref().expect("enabled").functions, &e.quadrature)),
        Subcommand::VerifyHwi => s(ineq::verify_hwi_1d(&pb, &e.hwi.as_ref().expect("enabled").functions, &e.quadrature)),
        Subcommand::VerifyKernel => s(ineq::verify_heat_kernel(&pb, e.kernel.as_ref().expect("enabled"))),
        Subcommand::VerifyXi => {
            let x = e.xi.as_ref().expect("enabled");
            let case = XiCase { xi: x.xi, grid: x.grid().resolve(&ctx.m), oracle: e.oracle.clone() };
            s(ineq::verify_xi_consequences(&pb, &case))
        }
        Subcommand::VerifyLs1 => {
            let case = e.ls1_case(&ctx.m).expect("enabled");
            s(ineq::verify_semigroup_logsobolev(&pb, &case, &ctx.mc()))
        }
        Subcommand::All => unreachable!("expanded into stages"),
    }
}

fn geometry_check(ctx: &Ctx<'_>, out: &mut Outcome) -> Result<Vec<CheckReport>, String> {
    let sec = ctx.e.geometry.as_ref().expect("enabled");
    let m = &ctx.m;
    let dim = m.dim();
    let points: Vec<Vec2> = m.grid_points(sec.points).into_iter().filter(|x| m.in_chart_interior(x)).collect();
    let mut reports = Vec::new();
    for f in &sec.functions {
        let results = parallel::map_indexed(points.len(), |i| geometry::gamma2_check(m, &|y: &Vec2| f.eval(m, y), &points[i]));
        let (mut worst, mut used, mut skipped) = (0f64, 0usize, 0usize);
        for (x, r) in points.iter().zip(results) {
            let Ok(g) = r else {
                skipped += 1;
                continue;
            };
            let rel = g.residual() / (1.0 + g.rhs.abs());
            worst = worst.max(rel);
            used += 1;
            let [x0, x1] = point(x);
            ctx.table(
                out,
                "gamma2",
                &["function", "x0", "x1", "lhs", "rhs", "residual"],
                vec![f.name(), x0, x1, num(g.lhs), num(g.rhs), num(g.residual())],
            );
        }
        let mut r = bound_report("geometry.gamma2", format!("f={} points={used}", f.name()), worst, GAMMA2_TOL);
        if used == 0 {
            r = CheckReport::inconclusive("geometry.gamma2", f.name(), "no interior point admits a full stencil", Hypotheses::default());
        } else if skipped > 0 {
            r = r.with_note(format!("{skipped} points skipped by the stencil"));
        }
        reports.push(r);
    }
    if let Some(cat) = m.catalog() {
        let header = &["quantity", "x0", "x1", "numeric", "exact", "error"];
        let mut worst = 0f64;
        for x in &points {
            let g = m.metric(x);
            let dirs: &[Vec2] = if dim == 1 { &[[1.0, 0.0]] } else { &[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] };
            for v in dirs {
                let v = linalg::scale(v, 1.0 / linalg::norm_g(&g, v, dim));
                let ric = geometry::ricci(m, x, &v).map_err(|e| e.to_string())?;
                let exact = if dim == 1 { 0.0 } else { cat.gauss_curvature };
                worst = worst.max((ric - exact).abs());
                let [x0, x1] = point(x);
                ctx.table(out, "catalog", header, vec!["ricci".into(), x0, x1, num(ric), num(exact), num((ric - exact).abs())]);
            }
        }
        reports.push(bound_report("geometry.ricci", format!("points={}", points.len()), worst, CATALOG_TOL));
        if dim == 2 {
            let mut worst = 0f64;
            let bpts = m.boundary_points(sec.boundary_samples);
            for x in &bpts {
                let Some(exact) = m.exact_second_fundamental_form(x) else { continue };
                let t = geometry::unit_tangent(m, x).map_err(|e| e.to_string())?;
                let ii = geometry::second_fundamental_form(m, x, &t, &t).map_err(|e| e.to_string())?;
                worst = worst.max((ii - exact).abs());
                let [x0, x1] = point(x);
                ctx.table(
                    out,
                    "catalog",
                    header,
                    vec!["second_fundamental_form".into(), x0, x1, num(ii), num(exact), num((ii - exact).abs())],
                );
            }
            reports.push(bound_report("geometry.second_fundamental_form", format!("points={}", bpts.len()), worst, CATALOG_TOL));
        }
    }
    Ok(reports)
}

fn class_d(ctx: &Ctx<'_>, out: &mut Outcome) -> Result<Vec<CheckReport>, String> {
    let pb = ctx.problem();
    let r = phi::class_d_check(&ctx.m, &ctx.phi, pb.strict_class_d, pb.grid).map_err(|e| e.to_string())?;
    let [a0, a1] = point(&r.argmin);
    ctx.table(
        out,
        "class_d",
        &[
            "inf_phi",
            "sup_phi",
            "inf_status",
            "max_normal_derivative",
            "normal_status",
            "min_convexity",
            "argmin_x0",
            "argmin_x1",
            "convexity_status",
            "status",
        ],
        vec![
            num(r.inf_phi),
            num(r.sup_phi),
            r.inf_status.to_string(),
            num(r.max_normal_derivative),
            r.normal_status.to_string(),
            num(r.min_convexity),
            a0,
            a1,
            r.convexity_status.to_string(),
            r.status().to_string(),
        ],
    );
    out.notes.push(format!(
        "class-d {}: {} (a {}, b {}, c {}: min II + N log phi = {:.6})",
        ctx.e.name,
        r.status(),
        r.inf_status,
        r.normal_status,
        r.convexity_status,
        r.min_convexity
    ));
    Ok(Vec::new())
}

fn curvature_bound(ctx: &Ctx<'_>, out: &mut Outcome) -> Result<Vec<CheckReport>, String> {
    let sec = ctx.e.curvature.as_ref().expect("enabled");
    let grid = ctx.e.hypotheses.grid;
    for &p in &sec.p {
        let r = phi::curvature_lower_bound(&ctx.m, &ctx.phi, p, grid).map_err(|e| e.to_string())?;
        let [a0, a1] = point(&r.argmin);
        ctx.table(
            out,
            "curvature_bound",
            &["p", "k", "raw_min", "margin", "argmin_x0", "argmin_x1"],
            vec![p.to_string(), num(r.k), num(r.raw_min), num(r.margin), a0, a1],
        );
        for (x, v) in &r.table {
            let [x0, x1] = point(x);
            ctx.table(out, "curvature_grid", &["p", "x0", "x1", "min_eigenvalue"], vec![p.to_string(), x0, x1, num(*v)]);
        }
        out.notes.push(format!("curvature-bound {} p={p}: K = {:.6} (grid minimum {:.6})", ctx.e.name, r.k, r.raw_min));
    }
    Ok(Vec::new())
}

fn simulate(ctx: &Ctx<'_>, out: &mut Outcome) -> Result<Vec<CheckReport>, String> {
    let sec = ctx.e.simulate.as_ref().expect("enabled");
    let n = ctx.e.mc.n;
    let mut reports = Vec::new();
    for (f, p) in sec.functions.iter().flat_map(|f| sec.points.iter().map(move |p| (f, p))) {
        let x0 = p.resolve(&ctx.m);
        let est = ctx.estimate(|s| estimators::estimate_pt_multi(s, f, &x0, &sec.times, n))?;
        let [p0, p1] = point(&x0);
        for (t, e) in sec.times.iter().zip(&est) {
            let oracle = ineq::oracle_pt(&ctx.m, &ctx.phi, f, &x0, *t, &ctx.e.oracle).map_err(|e| e.to_string())?;
            let (ov, oe) = oracle.unwrap_or((f64::NAN, f64::NAN));
            let z = (e.mean - ov) / e.stderr;
            ctx.table(
                out,
                "simulate",
                &["function", "x0", "x1", "t", "mean", "stderr", "n", "aborted", "oracle", "oracle_err", "z"],
                vec![
                    f.name(),
                    p0.clone(),
                    p1.clone(),
                    num(*t),
                    num(e.mean),
                    num(e.stderr),
                    e.n.to_string(),
                    e.aborted.to_string(),
                    num(ov),
                    num(oe),
                    num(z),
                ],
            );
            if oracle.is_some() {
                let mut r = agreement("simulate.oracle", format!("f={} x=({p0},{p1}) t={t}", f.name()), e.mean, ov, 3.0 * e.stderr, oe);
                if e.unreliable() {
                    r.verdict = Verdict::Inconclusive;
                    r = r.with_note("abort rate above limit");
                }
                reports.push(r);
            }
        }
    }
    if ctx.opts.dump_paths {
        let t = sec.times.iter().copied().fold(0.0, f64::max);
        let x0 = sec.points[0].resolve(&ctx.m);
        let sampler =
            Sampler::new(&ctx.m, &ctx.phi, SimConfig::new(ctx.e.mc.h, ctx.seed), Functionals::default()).map_err(|e| e.to_string())?;
        let path = ctx.opts.out.join(format!("paths-{}.bin", ctx.e.name));
        let io = |e: std::io::Error| format!("{}: {e}", path.display());
        fs::create_dir_all(&ctx.opts.out).map_err(io)?;
        let mut dump = PathDump::new(BufWriter::new(File::create(&path).map_err(io)?), ctx.m.dim()).map_err(io)?;
        for i in 0..sec.dump as u64 {
            dump.write_path(i, &sampler::trace_path(&sampler, &x0, t, i)).map_err(io)?;
        }
        dump.into_inner().flush().map_err(io)?;
    }
    Ok(reports)
}

fn local_time(ctx: &Ctx<'_>, out: &mut Outcome) -> Result<Vec<CheckReport>, String> {
    let sec = ctx.e.local_time.as_ref().expect("enabled");
    let x0 = match &sec.x0 {
        Some(p) => p.resolve(&ctx.m),
        None => ctx.m.boundary_points(1)[0],
    };
    let est = ctx.estimate(|s| estimators::local_time_mean(s, &x0, &sec.times, ctx.e.mc.n, sec.radius))?;
    // The reflected Brownian motion on the half-line started at 0.
    let reference = matches!(ctx.e.manifold, ManifoldConfig::HalfLine { ou: false }) && x0[0] == 0.0;
    let mut reports = Vec::new();
    for (t, e) in sec.times.iter().zip(&est) {
        let r = 2.0 * (t / std::f64::consts::PI).sqrt();
        ctx.table(
            out,
            "local_time",
            &["t", "mean", "stderr", "reference", "ratio"],
            vec![num(*t), num(e.mean), num(e.stderr), num(r), num(e.mean / r)],
        );
        if reference {
            let mut rep = CheckReport::assess(
                "local_time.reference",
                format!("t={t}"),
                (e.mean - r).abs() / r,
                LOCAL_TIME_TOL,
                3.0 * e.stderr / r,
                0.0,
                0.0,
                Hypotheses::default(),
            );
            if rep.verdict == Verdict::Inconclusive {
                rep.verdict = Verdict::Holds;
            }
            reports.push(rep);
        }
    }
    Ok(reports)
}

fn girsanov(ctx: &Ctx<'_>, out: &mut Outcome) -> Result<Vec<CheckReport>, String> {
    let sec = ctx.e.girsanov.as_ref().expect("enabled");
    let x0 = sec.x0.resolve(&ctx.m);
    let mut functionals = Vec::new();
    for f in &sec.functions {
        functionals.push(PathFunctional::Terminal(f.clone()));
        functionals.push(PathFunctional::TimeIntegral(f.clone()));
    }
    functionals.push(PathFunctional::Survival(sec.radius));
    let s = ctx.setup(ctx.e.mc.h);
    let rep = estimators::girsanov_equivalence(&s, sec.tilt, &x0, sec.t, &functionals, ctx.e.mc.n).map_err(|e| e.to_string())?;
    let header = &["functional", "weighted", "weighted_stderr", "tilted", "tilted_stderr", "z"];
    let mut reports = Vec::new();
    for c in &rep.comparisons {
        ctx.table(
            out,
            "girsanov",
            header,
            vec![c.functional.clone(), num(c.weighted.mean), num(c.weighted.stderr), num(c.tilted.mean), num(c.tilted.stderr), num(c.z)],
        );
        let stat = 3.0 * c.weighted.stderr.hypot(c.tilted.stderr);
        let mut r = agreement("girsanov.agreement", c.functional.clone(), c.weighted.mean, c.tilted.mean, stat, 0.0);
        if c.weighted.heavy_tail() {
            r = r.with_note("heavy-tailed weights");
        }
        reports.push(r);
    }
    let w = &rep.mean_weight;
    ctx.table(
        out,
        "girsanov",
        header,
        vec!["mean_weight".into(), num(w.mean), num(w.stderr), "1".into(), "0".into(), num((w.mean - 1.0) / w.stderr)],
    );
    reports.push(agreement("girsanov.mean_weight", format!("t={}", sec.t), w.mean, 1.0, 3.0 * w.stderr, 0.0));
    Ok(reports)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'static str,
    seed_override: Option<u64>,
    richardson: bool,
    strict_class_d: bool,
    parallel_feature: bool,
    threads: usize,
    experiments: Vec<ManifestExperiment>,
    timings: &'a [StageTiming],
    outputs: BTreeMap<String, String>,
    exit_code: i32,
}

#[derive(Serialize)]
struct ManifestExperiment {
    name: String,
    config_digest: String,
    seed: u64,
}

const RESULT_HEADER: [&str; 16] = [
    "experiment",
    "config_digest",
    "seed",
    "id",
    "case",
    "lhs",
    "rhs",
    "stat_tol",
    "oracle_tol",
    "bias_tol",
    "margin",
    "verdict",
    "negative",
    "hypotheses_verified",
    "k",
    "note",
];

fn csv_bytes(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

/// Writes `results.csv`, `reports.jsonl`, the tables and `manifest.json`.
pub fn write_outputs(file: &ConfigFile, sub: Subcommand, opts: &RunOptions, outcome: &Outcome) -> Result<(), RunError> {
    let dir = &opts.out;
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source: std::io::Error| RunError::Io { path: path.clone(), source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    let results = outcome.rows.iter().map(|row| {
        let r = &row.report;
        vec![
            row.experiment.clone(),
            r.config_digest.clone(),
            row.seed.to_string(),
            r.id.clone(),
            r.case.clone(),
            num(r.lhs),
            num(r.rhs),
            num(r.stat_tol),
            num(r.oracle_tol),
            num(r.bias_tol),
            num(r.margin),
            r.verdict.to_string(),
            r.negative.to_string(),
            r.hypotheses.verified().to_string(),
            r.hypotheses.k.map(num).unwrap_or_default(),
            r.note.clone().unwrap_or_default(),
        ]
    });
    let csv_err = |e: csv::Error| RunError::Io { path: dir.clone(), source: e.into() };
    files.insert("results.csv".into(), csv_bytes(&RESULT_HEADER, results).map_err(csv_err)?);
    let mut jsonl = Vec::new();
    for row in &outcome.rows {
        serde_json::to_writer(&mut jsonl, row).expect("reports serialise");
        jsonl.push(b'\n');
    }
    files.insert("reports.jsonl".into(), jsonl);
    for (name, t) in &outcome.tables {
        files.insert(format!("{name}.csv"), csv_bytes(&t.header, t.rows.iter().cloned()).map_err(csv_err)?);
    }
    let mut outputs = BTreeMap::new();
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io(&path))?;
        outputs.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        tool: "neumann-lab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: sub.name(),
        seed_override: opts.seed,
        richardson: opts.richardson,
        strict_class_d: opts.strict_class_d,
        parallel_feature: cfg!(feature = "parallel"),
        threads: parallel::current_threads(),
        experiments: file
            .experiments
            .iter()
            .map(|e| ManifestExperiment { name: e.name.clone(), config_digest: e.digest(), seed: opts.seed.unwrap_or(e.seed) })
            .collect(),
        timings: &outcome.timings,
        outputs,
        exit_code: outcome.exit_code(),
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Subcommand::ALL {
            assert_eq!(Subcommand::from_name(s.name()), Some(s));
        }
        assert_eq!(Subcommand::from_name("verify-everything"), None);
        assert_eq!(Subcommand::All.stages().len(), 14);
    }

    #[test]
    fn bound_reports_decide_without_hypotheses() {
        assert_eq!(bound_report("x", String::new(), 1e-5, 1e-4).verdict, Verdict::Holds);
        assert_eq!(bound_report("x", String::new(), 1e-3, 1e-4).verdict, Verdict::Violated);
        assert_eq!(agreement("x", String::new(), 1.0, 1.1, 0.2, 0.0).verdict, Verdict::Holds);
        assert_eq!(agreement("x", String::new(), 1.0, 1.5, 0.2, 0.1).verdict, Verdict::Violated);
    }
}
