//! End-to-end acceptance run of `configs/suite.toml`, one PASS/FAIL line per
//! criterion. Expected values are computed here from closed forms, not read
//! from the library.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

type Row = HashMap<String, String>;
type Outcome = Result<String, String>;
type Scalar = fn(f64) -> f64;

struct Run {
    dir: PathBuf,
    manifest: serde_json::Value,
}

impl Run {
    fn table(&self, name: &str) -> Vec<Row> {
        let mut r = csv::Reader::from_path(self.dir.join(format!("{name}.csv"))).unwrap();
        let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
        r.records().map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(str::to_string)).collect()).collect()
    }

    fn results(&self, experiment: &str, id: &str) -> Vec<Row> {
        self.table("results").into_iter().filter(|r| r["experiment"] == experiment && r["id"] == id).collect()
    }

    fn stage_seconds(&self, stage: &str) -> f64 {
        self.manifest["timings"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|t| t["stage"] == stage)
            .map(|t| t["wall_seconds"].as_f64().unwrap())
            .sum()
    }
}

fn f(r: &Row, k: &str) -> f64 {
    r[k].parse().unwrap_or_else(|_| panic!("{k} = {:?}", r[k]))
}

/// Value of `key=` in a case label such as `f=x0 x=0.2000 t=0.1`.
fn field(case: &str, key: &str) -> f64 {
    case.split_whitespace().find_map(|p| p.strip_prefix(key)).unwrap().parse().unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn suite(out: &Path, jobs: &str) -> Run {
    let config = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/suite.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_neumann-lab"))
        .args(["run", "all"])
        .arg(&config)
        .arg("--out")
        .arg(out)
        .args(["--jobs", jobs])
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{text}\n{}", String::from_utf8_lossy(&o.stderr));
    println!("  {}", text.lines().last().unwrap_or_default());
    let manifest = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    Run { dir: out.to_path_buf(), manifest }
}

// Γ₂(f) for the reflected OU generator f'' − x f' on the half-line.
fn ou_gamma2(function: &str, x: f64) -> Option<f64> {
    match function {
        "x0" => Some(1.0),
        "poly(1,0,1)" => Some(4.0 + 4.0 * x * x),
        "1+0.5x" => Some(0.25),
        _ => None,
    }
}

// Γ₂(f) = |∇²f|² on the flat disk.
fn disk_gamma2(function: &str) -> Option<f64> {
    match function {
        "x0" | "2+0.5x" => Some(0.0),
        "poly(0,1,1)" => Some(4.0),
        _ => None,
    }
}

fn bochner(r: &Run) -> Outcome {
    let rows = r.table("gamma2");
    let mut worst: f64 = 0.0;
    let mut counts: HashMap<(String, String), usize> = HashMap::new();
    let mut anchored = 0;
    for row in &rows {
        let (lhs, rhs) = (f(row, "lhs"), f(row, "rhs"));
        worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        *counts.entry((row["experiment"].clone(), row["function"].clone())).or_default() += 1;
        let exact = match row["experiment"].as_str() {
            "halfline-ou" => ou_gamma2(&row["function"], f(row, "x0")),
            "disk" => disk_gamma2(&row["function"]),
            _ => None,
        };
        if let Some(e) = exact {
            anchored += 1;
            if (lhs - e).abs() > 1e-4 * (1.0 + e.abs()) {
                return Err(format!("{} {} at {}: Γ₂ = {lhs}, closed form {e}", row["experiment"], row["function"], row["x0"]));
            }
        }
    }
    for m in ["disk", "annulus-phi", "hemisphere", "halfline-ou"] {
        let per: Vec<usize> = counts.iter().filter(|((e, _), _)| e == m).map(|(_, n)| *n).collect();
        if per.len() < 3 || per.iter().any(|n| *n < 50) {
            return Err(format!("{m}: points per function {per:?}"));
        }
    }
    let secs = r.stage_seconds("geometry-check");
    check(
        worst <= 1e-4 && secs < 10.0,
        format!("{} points, max relative residual {worst:.1e}, {anchored} closed-form anchors, {secs:.2} s", rows.len()),
    )
}

fn catalog(r: &Run) -> Outcome {
    let rows = r.table("catalog");
    let mut worst: f64 = 0.0;
    for row in &rows {
        let radius = f(row, "x0").hypot(f(row, "x1"));
        let exact = match (row["quantity"].as_str(), row["experiment"].as_str()) {
            ("ricci", "hemisphere") => 1.0,
            ("ricci", _) => 0.0,
            (_, "disk") => 1.0,
            (_, "annulus-phi") if (radius - 1.0).abs() < 1e-9 => -1.0,
            (_, "annulus-phi") if (radius - 2.0).abs() < 1e-9 => 0.5,
            (_, "hemisphere") => 0.0,
            other => return Err(format!("unexpected catalog row {other:?} at r = {radius}")),
        };
        worst = worst.max((f(row, "numeric") - exact).abs());
    }
    let secs = r.stage_seconds("geometry-check");
    check(worst <= 1e-3 && secs < 5.0, format!("{} values, max error {worst:.1e}, {secs:.2} s", rows.len()))
}

fn local_time(r: &Run) -> Outcome {
    let rows: Vec<Row> = r.table("local_time").into_iter().filter(|r| r["experiment"] == "halfline-bm").collect();
    let mut detail = Vec::new();
    let mut ok = rows.len() == 3;
    for (row, t) in rows.iter().zip([0.05, 0.25, 1.0]) {
        let reference = 2.0 * (t / PI).sqrt();
        let rel = (f(row, "mean") - reference).abs() / reference;
        ok &= f(row, "t") == t && rel <= 0.05;
        detail.push(format!("t={t}: {rel:.2}%", rel = 100.0 * rel));
    }
    let secs = r.stage_seconds("local-time");
    check(ok && secs < 300.0, format!("{}, {secs:.0} s", detail.join(", ")))
}

fn semigroup(r: &Run) -> Outcome {
    let rows: Vec<Row> = r.table("simulate").into_iter().filter(|r| r["experiment"] == "hemisphere").collect();
    let mut worst_z: f64 = 0.0;
    let mut worst_se: f64 = 0.0;
    let mut seen = Vec::new();
    for row in &rows {
        // Stereographic radius tan(θ/2).
        let theta = 2.0 * f(row, "x0").hypot(f(row, "x1")).atan();
        let t = f(row, "t");
        let c = theta.cos();
        let want = 2.0 / 3.0 - 2.0 / 3.0 * (-6.0 * t).exp() * (1.5 * c * c - 0.5);
        let se = f(row, "stderr");
        worst_z = worst_z.max((f(row, "mean") - want).abs() / se);
        worst_se = worst_se.max(se);
        if row["n"] != "100000" {
            return Err(format!("n = {}", row["n"]));
        }
        seen.push((theta, t));
    }
    let covered =
        [0.0, FRAC_PI_4].iter().all(|th| [0.05, 0.1, 0.3].iter().all(|t| seen.iter().any(|(a, b)| (a - th).abs() < 1e-9 && b == t)));
    check(covered && worst_z <= 3.0 && worst_se <= 2e-3, format!("{} cases, max |z| {worst_z:.2}, max stderr {worst_se:.1e}", rows.len()))
}

fn girsanov(r: &Run) -> Outcome {
    let rows = r.table("girsanov");
    let mut kinds = Vec::new();
    let mut worst: f64 = 0.0;
    for row in &rows {
        let (w, t) = (f(row, "weighted"), f(row, "tilted"));
        let spread = f(row, "weighted_stderr").hypot(f(row, "tilted_stderr"));
        worst = worst.max((w - t).abs() / spread);
        kinds.push(row["functional"].split('[').next().unwrap().to_string());
    }
    let all = ["terminal", "integral", "survival", "mean_weight"].iter().all(|k| kinds.iter().any(|x| x == k));
    let config = fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/suite.toml")).unwrap();
    let n_ok = config.contains("name = \"annulus-girsanov\"") && config.contains("mc = { n = 100000, h = 1e-4 }");
    check(all && n_ok && worst <= 3.0, format!("{} comparisons incl. E[R] = 1, max |z| {worst:.2}", rows.len()))
}

fn thm11_positive(r: &Run) -> Outcome {
    let k_annulus =
        r.table("curvature_bound").into_iter().find(|r| r["experiment"] == "annulus-phi" && r["p"] == "1").map(|r| f(&r, "k")).unwrap();
    let mut n = 0;
    for (exp, k) in [("hemisphere-inequalities", 1.0), ("annulus-phi", k_annulus)] {
        let w = r.results(exp, "thm11.weighted");
        let t = r.results(exp, "thm11.tilted");
        if w.is_empty() || w.len() != t.len() {
            return Err(format!("{exp}: {} weighted vs {} tilted rows", w.len(), t.len()));
        }
        for row in w.iter().chain(&t) {
            let tol = f(row, "stat_tol") + f(row, "oracle_tol") + f(row, "bias_tol");
            if row["verdict"] != "HOLDS" || f(row, "lhs") > f(row, "rhs") + tol || (f(row, "k") - k).abs() > 1e-12 {
                return Err(format!(
                    "{exp} {} {}: {} (lhs {}, rhs {}, K {})",
                    row["id"], row["case"], row["verdict"], row["lhs"], row["rhs"], row["k"]
                ));
            }
            n += 1;
        }
    }
    check(true, format!("{n} checks HOLDS, annulus K = {k_annulus:.6}"))
}

fn thm11_negative(r: &Run) -> Outcome {
    let oracle = r.results("annulus-unweighted", "thm11.negative.oracle");
    let mc = r.results("annulus-unweighted", "thm11.negative.mc");
    let certified = oracle.iter().filter(|row| {
        let tol = f(row, "stat_tol") + f(row, "oracle_tol") + f(row, "bias_tol");
        field(&row["case"], "t=") <= 0.01 && row["verdict"] == "VIOLATED" && f(row, "lhs") > f(row, "rhs") + tol
    });
    let certified = certified.count();
    // |∇P_t f|² → |∇cos ϑ|² = 1 at (0, 1).
    let near_one = oracle.iter().all(|row| (f(row, "lhs") - 1.0).abs() < 0.05);
    let beyond = mc.iter().filter(|row| f(row, "lhs") - f(row, "rhs") > f(row, "stat_tol")).count();
    check(
        certified > 0 && near_one && beyond > 0,
        format!("oracle VIOLATED at {certified}/{} times, Monte Carlo beyond 3 stderr at {beyond}/{}", oracle.len(), mc.len()),
    )
}

fn poincare(r: &Run) -> Outcome {
    let row = r.results("halfline-ou", "poincare").into_iter().find(|r| r["case"] == "f=x0").unwrap();
    let var = 1.0 - 2.0 / PI;
    let (lhs, rhs, margin) = (f(&row, "lhs"), f(&row, "rhs"), f(&row, "margin"));
    check(
        row["verdict"] == "HOLDS" && (lhs - var).abs() <= 1e-6 && (rhs - 1.0).abs() <= 1e-6 && (margin - 2.0 / PI).abs() <= 1e-6,
        format!("lhs {lhs:.9}, rhs {rhs:.9}, margin − 2/π = {:.1e}", margin - 2.0 / PI),
    )
}

// P_t x² = x² e^{−2t} + 1 − e^{−2t} for the reflected OU process.
fn ou_second_moment(x: f64, t: f64) -> f64 {
    x * x * (-2.0 * t).exp() + 1.0 - (-2.0 * t).exp()
}

fn harnack_and_kernel(r: &Run) -> Outcome {
    let lh = r.results("halfline-ou", "cor12.log_harnack");
    let mut times = Vec::new();
    let mut anchored = 0;
    for row in &lh {
        let t = field(&row["case"], "t=");
        times.push(t);
        if row["verdict"] != "HOLDS" || f(row, "oracle_tol") > 1e-6 {
            return Err(format!("{}: {} with oracle error {}", row["case"], row["verdict"], row["oracle_tol"]));
        }
        if row["case"].starts_with("f=poly(1,0,1) ") {
            let (x, y) = (field(&row["case"], "x="), field(&row["case"], "y="));
            let cost = (x - y).powi(2) / (2.0 * ((2.0 * t).exp() - 1.0));
            let want = (1.0 + ou_second_moment(x, t)).ln() + cost;
            if (f(row, "rhs") - want).abs() > 1e-6 {
                return Err(format!("{}: rhs {} vs closed form {want}", row["case"], row["rhs"]));
            }
            anchored += 1;
        }
    }
    let kernel: Vec<Row> = ["cor13.kernel_lower", "cor13.kernel_entropy"].iter().flat_map(|id| r.results("halfline-ou", id)).collect();
    for row in &kernel {
        times.push(field(&row["case"], "t="));
        if row["verdict"] != "HOLDS" || f(row, "oracle_tol") > 1e-6 {
            return Err(format!("{} {}: {} with oracle error {}", row["id"], row["case"], row["verdict"], row["oracle_tol"]));
        }
    }
    let covered = [0.1, 0.3, 0.5].iter().all(|t| times.contains(t));
    check(
        covered && anchored > 0 && !kernel.is_empty(),
        format!("{} log-Harnack ({anchored} closed-form rhs) and {} kernel checks HOLDS", lh.len(), kernel.len()),
    )
}

/// Simpson rule for the half-Gaussian on [0, 12].
fn half_gaussian_mean(g: impl Fn(f64) -> f64) -> f64 {
    let n = 24_000;
    let h = 12.0 / n as f64;
    let w = |i: usize| {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let dens = |x: f64| (2.0 / PI).sqrt() * (-0.5 * x * x).exp();
    (0..=n).map(|i| w(i) * g(i as f64 * h) * dens(i as f64 * h)).sum::<f64>() * h / 3.0
}

fn logsobolev(r: &Run) -> Outcome {
    let rows = r.results("halfline-ou", "logsobolev");
    let fns: [(&str, Scalar, Scalar); 3] = [
        ("f=1+1x", |x| 1.0 + x, |_| 1.0),
        ("f=poly(1,0,1)", |x| 1.0 + x * x, |x| 2.0 * x),
        ("f=poly(2,-1,0.25)", |x| 2.0 - x + 0.25 * x * x, |x| -1.0 + 0.5 * x),
    ];
    for (case, g, dg) in fns {
        let row = rows.iter().find(|r| r["case"] == case).ok_or(format!("{case} missing"))?;
        let z = half_gaussian_mean(|x| g(x).powi(2));
        let ent = half_gaussian_mean(|x| {
            let v = g(x).powi(2) / z;
            v * v.ln()
        });
        let rhs = 2.0 * half_gaussian_mean(|x| dg(x).powi(2)) / z;
        if row["verdict"] != "HOLDS" || (f(row, "lhs") - ent).abs() > 1e-6 || (f(row, "rhs") - rhs).abs() > 1e-6 || row["stat_tol"] != "0" {
            return Err(format!("{case}: {} lhs {} ({ent}) rhs {} ({rhs})", row["verdict"], row["lhs"], row["rhs"]));
        }
    }
    check(rows.len() == 3, format!("{} functions HOLDS, entropy and energy match independent quadrature to 1e-6", rows.len()))
}

fn xi(r: &Run) -> Outcome {
    let mut rows = Vec::new();
    for id in ["xi.variance_lower", "xi.variance_upper", "xi.log_harnack"] {
        rows.extend(r.results("halfline-ou", id));
    }
    let mut anchored = 0;
    for row in &rows {
        if row["verdict"] != "HOLDS" {
            return Err(format!("{} {}: {}", row["id"], row["case"], row["verdict"]));
        }
        if row["id"] == "xi.variance_upper" && row["case"].starts_with("f=poly(1,0,1) ") {
            // Var_t(1 + X²) = 2σ⁴ + 4m²σ² with m = x e^{−t}, σ² = 1 − e^{−2t}.
            let (x, t) = (field(&row["case"], "x="), field(&row["case"], "t="));
            let s2 = 1.0 - (-2.0 * t).exp();
            let m2 = x * x * (-2.0 * t).exp();
            let var = 2.0 * s2 * s2 + 4.0 * m2 * s2;
            let rhs = s2 * 4.0 * ou_second_moment(x, t);
            if (f(row, "lhs") - var).abs() > 1e-6 || (f(row, "rhs") - rhs).abs() > 1e-6 {
                return Err(format!("{}: lhs {} ({var}) rhs {} ({rhs})", row["case"], row["lhs"], row["rhs"]));
            }
            anchored += 1;
        }
    }
    check(
        anchored == 12,
        format!("{} checks HOLDS over x ∈ {{0, 0.2, 1.5}}, t ∈ {{0, 0.1, 0.3, 0.5}}; {anchored} closed-form anchors", rows.len()),
    )
}

fn determinism(a: &Run, b: &Run) -> Outcome {
    let mut names: Vec<String> = fs::read_dir(&a.dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv") || n.ends_with(".jsonl"))
        .collect();
    names.sort();
    for n in &names {
        if fs::read(a.dir.join(n)).ok() != fs::read(b.dir.join(n)).ok() {
            return Err(format!("{n} differs between --jobs 8 and --jobs 1"));
        }
    }
    let threads = (a.manifest["threads"].as_u64(), b.manifest["threads"].as_u64());
    check(threads == (Some(8), Some(1)), format!("{} files byte-identical across two runs, threads {threads:?}", names.len()))
}

#[test]
fn acceptance_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    println!("running the full suite with --jobs 8");
    let a = suite(&tmp.path().join("jobs8"), "8");
    println!("running the full suite with --jobs 1");
    let b = suite(&tmp.path().join("jobs1"), "1");
    let elapsed = start.elapsed().as_secs_f64();

    let criteria: Vec<(&str, Outcome)> = vec![
        ("Bochner identity", bochner(&a)),
        ("geometry catalog", catalog(&a)),
        ("local time of reflected BM", local_time(&a)),
        ("hemisphere semigroup vs spectral formula", semigroup(&a)),
        ("Girsanov weighted vs tilted", girsanov(&a)),
        ("gradient estimate, positive cases", thm11_positive(&a)),
        ("gradient estimate, concave inner circle", thm11_negative(&a)),
        ("Poincaré on the OU half-line", poincare(&a)),
        ("log-Harnack and heat kernel bounds", harnack_and_kernel(&a)),
        ("log-Sobolev on the OU half-line", logsobolev(&a)),
        ("consequences of the rate e^{-2t}", xi(&a)),
        ("determinism across runs and threads", determinism(&a, &b)),
    ];
    println!();
    for (i, (name, outcome)) in criteria.iter().enumerate() {
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => println!("FAIL {:>2} {name}: {d}", i + 1),
        }
    }
    println!("two suite runs in {elapsed:.0} s");
    let failed: Vec<usize> = criteria.iter().enumerate().filter(|(_, (_, o))| o.is_err()).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
