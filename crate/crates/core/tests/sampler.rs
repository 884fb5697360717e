use neumann_lab::estimators::{self, map_paths, McEstimate, Setup};
use neumann_lab::functions::TestFunction;
use neumann_lab::geometry::{manifold::stereo_from_polar, ManifoldSpec};
use neumann_lab::linalg::{self, Vec2};
use neumann_lab::phi::PhiField;
use neumann_lab::rng::PathRng;
use neumann_lab::sampler::{DriftVariant, Functionals, PathState, RunningField, Sampler, SimConfig};
use std::f64::consts::{PI, SQRT_2};

fn sampler<'a>(m: &'a ManifoldSpec, phi: &'a PhiField, h: f64, fun: Functionals) -> Sampler<'a> {
    Sampler::new(m, phi, SimConfig::new(h, 7), fun).unwrap()
}

#[test]
fn half_line_steps_from_the_origin() {
    let m = ManifoldSpec::half_line(false);
    let phi = PhiField::One;
    let h = 1e-4;
    let s = sampler(&m, &phi, h, Functionals::default());
    let x0 = [0.0, 0.0];

    let mut st = s.initial_state(&x0);
    s.step(&mut st, &[0.7, 0.0], &x0).unwrap();
    assert!((st.x[0] - SQRT_2 * 0.7 * h.sqrt()).abs() < 1e-15);
    assert_eq!(st.local_time, 0.0);

    let mut st = s.initial_state(&x0);
    s.step(&mut st, &[-0.7, 0.0], &x0).unwrap();
    assert_eq!(st.x[0], 0.0);
    assert!((st.local_time - SQRT_2 * 0.7 * h.sqrt()).abs() < 1e-15);
}

#[test]
fn interior_displacement_has_the_diffusion_covariance() {
    let m = ManifoldSpec::disk(1.0);
    let phi = PhiField::One;
    let h = 1e-4;
    let s = sampler(&m, &phi, h, Functionals::default());
    let x0 = [0.1, -0.2];
    let n = 100_000;
    let mut rng = PathRng::new(11, 0);
    let (mut m1, mut m2, mut c11, mut c22, mut c12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..n {
        let mut st = s.initial_state(&x0);
        s.step(&mut st, &[rng.normal(), rng.normal()], &x0).unwrap();
        let d = linalg::sub(&st.x, &x0);
        m1 += d[0];
        m2 += d[1];
        c11 += d[0] * d[0];
        c22 += d[1] * d[1];
        c12 += d[0] * d[1];
    }
    let nf = n as f64;
    let var = 2.0 * h;
    let se_mean = (var / nf).sqrt();
    assert!((m1 / nf).abs() < 4.0 * se_mean && (m2 / nf).abs() < 4.0 * se_mean);
    // Var of a sample second moment is 2σ⁴/n.
    let se_var = var * (2.0 / nf).sqrt();
    assert!((c11 / nf - var).abs() < 4.0 * se_var, "{}", c11 / nf);
    assert!((c22 / nf - var).abs() < 4.0 * se_var);
    assert!((c12 / nf).abs() < 4.0 * var / nf.sqrt());
}

#[test]
fn zero_horizon_and_unit_weight_short_circuits() {
    let m = ManifoldSpec::annulus(1.0, 2.0);
    let phi = PhiField::One;
    let fun = Functionals { stoch_integral: true, tilt: Some(-SQRT_2), running: vec![RunningField::GradLogSq], exit_radii: vec![0.5] };
    let s = sampler(&m, &phi, 1e-3, fun);
    let x0 = [0.0, 1.5];
    let rec = s.simulate_path(&x0, &[0.0], 3);
    let st = rec.terminal().unwrap();
    assert_eq!(st.x, x0);
    assert_eq!((st.t, st.local_time, st.log_weight, st.stoch_integral), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(st.running, vec![0.0]);

    for i in 0..50 {
        let st = s.simulate_path(&x0, &[0.2], i).terminal().cloned().unwrap();
        assert_eq!(st.stoch_integral, 0.0);
        assert_eq!(st.log_weight, 0.0);
        assert_eq!(st.running[0], 0.0);
    }
}

#[test]
fn paths_are_determined_by_seed_and_index() {
    let m = ManifoldSpec::hemisphere_polar(1.0);
    let phi = PhiField::One;
    let s = sampler(&m, &phi, 1e-3, Functionals::default());
    let x0 = [0.8, 0.3];
    let a = s.simulate_path(&x0, &[0.05, 0.1], 42);
    let b = s.simulate_path(&x0, &[0.05, 0.1], 42);
    assert_eq!(a, b);
    assert_ne!(a, s.simulate_path(&x0, &[0.05, 0.1], 43));
    let other = Sampler::new(&m, &phi, SimConfig::new(1e-3, 8), Functionals::default()).unwrap();
    assert_ne!(a, other.simulate_path(&x0, &[0.05, 0.1], 42));
}

#[test]
fn states_stay_in_m_and_frames_stay_orthonormal() {
    let phi = PhiField::annulus_default();
    let cases: Vec<(ManifoldSpec, Vec2)> = vec![
        (ManifoldSpec::hemisphere_polar(1.0), [1.3, 0.0]),
        (ManifoldSpec::upper_hemisphere(1.0), stereo_from_polar(1.4, 2.0)),
        (ManifoldSpec::annulus(1.0, 2.0), [0.0, 1.05]),
        (ManifoldSpec::disk(1.0), [0.95, 0.0]),
    ];
    for (m, x0) in &cases {
        let s = Sampler::new(m, &phi, SimConfig::new(1e-3, 5).with_drift(DriftVariant::Phi), Functionals::default()).unwrap();
        for i in 0..40 {
            let mut worst_frame: f64 = 0.0;
            let mut worst_b = f64::INFINITY;
            let mut last_l = 0.0;
            let mut monotone = true;
            let mut obs = |st: &PathState| {
                worst_frame = worst_frame.max(linalg::frame_defect(&st.frame, &m.metric(&st.x), 2));
                worst_b = worst_b.min(m.boundary_fn(&st.x));
                monotone &= st.local_time >= last_l;
                last_l = st.local_time;
            };
            let rec = s.simulate_path_observed(x0, &[0.2], i, Some(&mut obs));
            assert!(rec.aborted.is_none());
            assert!(worst_frame < 1e-6, "{}: {worst_frame}", m.name());
            assert!(worst_b >= -1e-12, "{}: {worst_b}", m.name());
            assert!(monotone);
        }
    }
}

#[test]
fn local_time_is_zero_unless_the_boundary_is_reached() {
    let m = ManifoldSpec::disk(1.0);
    let phi = PhiField::One;
    let s = sampler(&m, &phi, 1e-4, Functionals::default());
    let x0 = [0.5, 0.0];
    let mut touched = 0;
    for i in 0..400 {
        let mut min_b = f64::INFINITY;
        let mut obs = |st: &PathState| min_b = min_b.min(m.boundary_fn(&st.x));
        let rec = s.simulate_path_observed(&x0, &[0.05], i, Some(&mut obs));
        let l = rec.terminal().unwrap().local_time;
        // Projected points sit on ∂M up to round-off.
        if min_b > m.boundary_tolerance() {
            assert_eq!(l, 0.0);
        } else {
            touched += 1;
            assert!(l > 0.0);
        }
    }
    assert!(touched > 0 && touched < 400);
}

// Fraction of paths from distance r to ∂M that reach the boundary by time T
// decays like exp(−c r²/T) as T ↓ 0.
#[test]
fn boundary_hitting_fraction_decays_in_small_time() {
    let m = ManifoldSpec::disk(1.0);
    let phi = PhiField::One;
    let s = sampler(&m, &phi, 1e-4, Functionals::default());
    let x0 = [0.7, 0.0];
    let times = [0.005, 0.01, 0.02, 0.04];
    let n = 4000;
    let hits = map_paths(&s, &x0, &times, n, 0, |r| r.snapshots.iter().map(|st| st.local_time > 0.0).collect::<Vec<_>>());
    let frac: Vec<f64> = (0..times.len()).map(|j| hits.iter().filter(|v| v[j]).count() as f64 / n as f64).collect();
    assert!(frac.iter().all(|&f| f > 0.0), "{frac:?}");
    assert!(frac.windows(2).all(|w| w[0] < w[1]), "{frac:?}");
    let xs: Vec<f64> = times.iter().map(|t| 1.0 / t).collect();
    let ys: Vec<f64> = frac.iter().map(|f| f.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 4.0, ys.iter().sum::<f64>() / 4.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let fit: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let total: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    assert!(slope < 0.0);
    assert!(1.0 - fit / total > 0.95, "log-fraction vs 1/T is not close to linear: {frac:?}");
}

#[test]
fn mean_local_time_on_the_half_line() {
    let m = ManifoldSpec::half_line(false);
    let phi = PhiField::One;
    let s = Setup::new(&m, &phi, SimConfig::new(1e-4, 1));
    let e = estimators::local_time_mean(&s, &[0.0, 0.0], &[0.0, 0.25], 10_000, None).unwrap();
    assert_eq!(e[0].mean, 0.0);
    let want = 2.0 * (0.25 / PI).sqrt();
    assert!((e[1].mean - want).abs() < 0.05 * want, "{} vs {want}", e[1].mean);
}

// E X_T = 2√(T/π) for the reflected process started at 0.
#[test]
fn weak_order_on_the_half_line() {
    let m = ManifoldSpec::half_line(false);
    let phi = PhiField::One;
    let t = 0.25;
    let exact = 2.0 * (t / PI).sqrt();
    let f = TestFunction::Coordinate { axis: 0 };
    let hs = [1e-2, 2.5e-3, 6.25e-4];
    let est: Vec<McEstimate> = hs
        .iter()
        .map(|&h| estimators::estimate_pt(&Setup::new(&m, &phi, SimConfig::new(h, 9)), &f, &[0.0, 0.0], t, 200_000).unwrap())
        .collect();
    let err: Vec<f64> = est.iter().map(|e| (e.mean - exact).abs()).collect();
    let order = (err[0] / err[2]).ln() / (hs[0] / hs[2]).ln();
    // Delta-method spread of the fitted order.
    let spread = ((est[0].stderr / err[0]).powi(2) + (est[2].stderr / err[2]).powi(2)).sqrt() / (hs[0] / hs[2]).ln();
    println!("errors {err:?} order {order:.3} ± {spread:.3}");
    assert!(err[0] > err[1] && err[1] > err[2]);
    assert!(order + 3.0 * spread >= 0.5, "order {order} ± {spread}");
}

#[test]
fn girsanov_weight_has_unit_mean() {
    let m = ManifoldSpec::annulus(1.0, 2.0);
    let phi = PhiField::annulus_default();
    let s = Setup::new(&m, &phi, SimConfig::new(2e-4, 3));
    let rep = estimators::girsanov_equivalence(&s, -SQRT_2, &[0.0, 1.5], 0.1, &[], 10_000).unwrap();
    let w = &rep.mean_weight;
    assert!((w.mean - 1.0).abs() < 3.0 * w.stderr, "{} ± {}", w.mean, w.stderr);
    assert!(w.stderr > 0.0);
}
