use neumann_lab::oracle::{
    self, annulus_mode_solver, certified_solve, hemisphere_spectral, neumann_pde_1d, w2::w2_1d_with, w2_1d, Density1d, KernelSpec, PdeGrid,
    SpectralKernel,
};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_4, PI};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn flat_grid(b: f64, m: usize, k: f64) -> PdeGrid {
    PdeGrid::with_potential(0.0, b, m, k, |_| 0.0).unwrap()
}

fn ou_grid(m: usize, k: f64) -> PdeGrid {
    PdeGrid::with_potential(0.0, 6.0, m, k, |x| -0.5 * x * x).unwrap()
}

// Independent Mehler formula for the reflected OU kernel w.r.t. the half-Gaussian.
fn mehler(x: f64, y: f64, t: f64) -> f64 {
    let a = (-t).exp();
    let var = 1.0 - a * a;
    let q = |z: f64| (-(z * z) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt();
    let mu = (2.0 / PI).sqrt() * (-0.5 * y * y).exp();
    (q(y - a * x) + q(y + a * x)) / mu
}

#[test]
fn constants_are_fixed() {
    let g = ou_grid(200, 1e-3);
    let u = neumann_pde_1d(&g, &g.sample(|_| 1.0), 0.7).unwrap();
    assert!(u.iter().all(|v| (v - 1.0).abs() < 1e-13));
    let r = annulus_mode_solver(1.0, 2.0, 0, |_| 1.0, &[0.3], 200, 1e-3).unwrap();
    let worst = r[0].values().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn cosine_is_a_neumann_eigenfunction() {
    let g = flat_grid(PI, 2000, 1e-5);
    let t: f64 = 0.1;
    let u = neumann_pde_1d(&g, &g.sample(f64::cos), t).unwrap();
    let want = g.sample(|x| (-t).exp() * x.cos());
    assert!(max_diff(&u, &want) < 1e-6, "{}", max_diff(&u, &want));
    assert!(neumann_pde_1d(&g, &g.sample(f64::cos), 0.100005).is_err());
}

#[test]
fn certified_ou_reference() {
    let g = ou_grid(300, 1e-3);
    let c = certified_solve(&g, |x| x, &[0.5]).unwrap();
    let (v, err) = c[0].at(0.5);
    assert!(err < 1e-6, "{err}");
    // Mehler integral of y against the kernel, by Simpson on [0, 8].
    let n = 8000;
    let h = 8.0 / n as f64;
    let mu = |y: f64| (2.0 / PI).sqrt() * (-0.5 * y * y).exp();
    let s: f64 = (0..=n)
        .map(|i| {
            let y = i as f64 * h;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * y * mehler(0.5, y, 0.5) * mu(y)
        })
        .sum::<f64>()
        * h
        / 3.0;
    assert!((v - s).abs() < 1e-6, "{v} vs {s}");
}

#[test]
fn semigroup_property() {
    // Startup damping makes composition exact only up to O(k²).
    let g = ou_grid(400, 2.5e-4);
    let f = g.sample(|x| (1.0 + x * x).ln());
    let st = g.solve(&f, &[0.2, 0.5]).unwrap();
    let composed = neumann_pde_1d(&g, &st[0], 0.3).unwrap();
    assert!(max_diff(&composed, &st[1]) < 1e-7, "{}", max_diff(&composed, &st[1]));
}

#[test]
fn neumann_condition_is_preserved() {
    let c = certified_solve(&flat_grid(PI, 400, 1e-4), |x| (-(x - 1.0) * (x - 1.0)).exp() + 0.3 * x, &[0.2, 0.5]).unwrap();
    for s in &c {
        for x in [0.0, PI] {
            let (d, _) = s.derivative_at(x);
            assert!(d.abs() < 1e-6, "u'({x}) = {d}");
        }
    }
}

#[test]
fn mu_mass_is_invariant() {
    let g = ou_grid(600, 1e-3);
    let f = g.sample(|x| x * x * (-x).exp() + 0.1 * x);
    let m0 = g.mu_mass(&f);
    for u in g.solve(&f, &[0.1, 0.5, 2.0]).unwrap() {
        assert!((g.mu_mass(&u) - m0).abs() < 1e-8 * m0.abs().max(1.0));
    }
}

#[test]
fn spectral_and_pde_agree_on_the_interval() {
    let f = |x: f64| (0.8 * x).sin() + 0.2 * x * x;
    let g = flat_grid(PI, 300, 1e-3);
    let c = certified_solve(&g, f, &[0.3]).unwrap();
    let sk = SpectralKernel::new(&KernelSpec::flat(0.0, PI), 48);
    let xs = [0.0, 0.7, 1.9, PI];
    let spec = sk.apply(f, &xs, 0.3);
    for (x, v) in xs.iter().zip(&spec) {
        assert!((c[0].at(*x).0 - v).abs() < 1e-6, "x={x}: {} vs {v}", c[0].at(*x).0);
    }

    let ou = SpectralKernel::new(&KernelSpec::quadratic(0.0, 6.0, 1.0), 48);
    let c = certified_solve(&ou_grid(300, 1e-3), |x| (-x).exp(), &[0.3]).unwrap();
    for (x, v) in xs.iter().zip(ou.apply(|x| (-x).exp(), &xs, 0.3)) {
        assert!((c[0].at(*x).0 - v).abs() < 1e-6);
    }
}

#[test]
fn annulus_modes_decay() {
    let r = annulus_mode_solver(1.0, 2.0, 1, |_| 1.0, &[0.005, 0.05], 200, 1.25e-4).unwrap();
    for s in &r {
        for (x, v) in s.nodes.iter().zip(s.values()) {
            if *x > 1.0 && *x < 2.0 {
                assert!(*v < 1.0, "u({x}) = {v}");
            }
        }
    }
}

// |∇P_t cos ϑ|² = u₁(t,1)² against P_t|∇cos ϑ|² = ½(v₀ + v₂)(t,1) for sin²ϑ/r².
#[test]
fn inner_circle_mode_comparison_is_violated() {
    let times = [0.0025, 0.005, 0.01];
    let u1 = annulus_mode_solver(1.0, 2.0, 1, |_| 1.0, &times, 200, 1.25e-4).unwrap();
    let v0 = annulus_mode_solver(1.0, 2.0, 0, |r| 1.0 / (r * r), &times, 200, 1.25e-4).unwrap();
    let v2 = annulus_mode_solver(1.0, 2.0, 2, |r| 1.0 / (r * r), &times, 200, 1.25e-4).unwrap();
    for j in 0..times.len() {
        let (u, eu) = u1[j].at(1.0);
        let (a, ea) = v0[j].at(1.0);
        let (b, eb) = v2[j].at(1.0);
        let lhs = u * u;
        let rhs = 0.5 * (a + b);
        assert!(eu + ea + eb < 1e-6);
        assert!(lhs > rhs + 2.0 * u * eu + ea + eb, "t={}: {lhs} vs {rhs}", times[j]);
    }
}

#[test]
fn hemisphere_spectral_examples() {
    let p2 = [-0.5, 0.0, 1.5];
    for t in [0.0f64, 0.1, 0.7] {
        let th: f64 = 0.9;
        let want = (-6.0 * t).exp() * (1.5 * th.cos().powi(2) - 0.5);
        assert!((hemisphere_spectral(&p2, th, t, 8).unwrap() - want).abs() < 1e-14);
    }
    let v = hemisphere_spectral(&oracle::spectral::SIN2, 0.0, 0.1, 8).unwrap();
    assert!((v - 2.0 / 3.0 * (1.0 - (-0.6f64).exp())).abs() < 1e-14);
    assert!((hemisphere_spectral(&oracle::spectral::SIN2, FRAC_PI_4, 0.0, 8).unwrap() - 0.5).abs() < 1e-14);
    assert!(hemisphere_spectral(&[0.0, 1.0], 0.3, 0.1, 8).is_err());
}

#[test]
fn wasserstein_examples() {
    let g = |x: f64| (-0.5 * x * x).exp();
    let a = Density1d::from_fn(0.0, 6.0, 20_000, g).normalized();
    assert!(w2_1d(&a, &a).unwrap() < 1e-12);

    let bump = |c: f64| move |x: f64| (-((x - c) / 0.01).powi(2)).exp();
    let p = Density1d::from_fn(0.0, 1.0, 20_000, bump(0.2)).normalized();
    let q = Density1d::from_fn(0.0, 1.0, 20_000, bump(0.7)).normalized();
    assert!((w2_1d(&p, &q).unwrap() - 0.5).abs() < 1e-4);

    let b = Density1d::from_fn(0.0, 6.0, 20_000, |x| x * x * g(x)).normalized();
    let coarse = w2_1d(&a, &b).unwrap();
    let fine = w2_1d_with(
        &Density1d::from_fn(0.0, 6.0, 40_000, g).normalized(),
        &Density1d::from_fn(0.0, 6.0, 40_000, |x| x * x * g(x)).normalized(),
        20_000,
    )
    .unwrap();
    assert!((coarse - fine).abs() < 1e-4, "{coarse} vs {fine}");
    assert!(coarse > 0.5);

    let raw = Density1d::from_fn(0.0, 6.0, 100, g);
    assert!(w2_1d(&raw, &a).is_err());
}

#[test]
fn heat_kernel_properties() {
    let spec = KernelSpec::quadratic(0.0, 6.0, 1.0);
    let nodes: Vec<f64> = (0..=12).map(|i| i as f64 * 0.25).collect();
    let long = oracle::heat_kernel_1d(&spec, &nodes, 20.0).unwrap();
    assert!(long.p.iter().all(|v| (v - 1.0).abs() < 1e-6));

    let sk = SpectralKernel::new(&spec, 48);
    let gl = oracle::GaussLegendre::new(120);
    for x in [0.0, 1.0, 2.5] {
        let mass = gl.composite(0.0, 6.0, 6, |y| sk.kernel(x, y, 0.2) * sk.mu_density(y));
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }

    for t in [0.1, 0.5] {
        let k = oracle::heat_kernel_1d(&spec, &nodes, t).unwrap();
        for (i, x) in nodes.iter().enumerate() {
            for (j, y) in nodes.iter().enumerate() {
                let p = k.p[(i, j)];
                // Window truncation at 6 is far below the tolerance here.
                assert!((p - mehler(*x, *y, t)).abs() < 1e-5 * mehler(*x, *y, t).max(1.0), "p_{t}({x},{y})");
                let bound = (-(x - y).powi(2) / (2.0 * (t.exp() - 1.0))).exp();
                assert!(p >= bound);
            }
        }
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn pde_is_linear_and_monotone(a in -2.0..2.0f64, b in 0.1..3.0f64, t in 1usize..20) {
        let g = ou_grid(120, 1e-2);
        let t = t as f64 * 1e-2;
        let f1 = g.sample(|x| (b * x).cos());
        let f2 = g.sample(|x| x * (-x).exp());
        let sum: Vec<f64> = f1.iter().zip(&f2).map(|(p, q)| p + a * q).collect();
        let u1 = neumann_pde_1d(&g, &f1, t).unwrap();
        let u2 = neumann_pde_1d(&g, &f2, t).unwrap();
        let us = neumann_pde_1d(&g, &sum, t).unwrap();
        for i in 0..us.len() {
            prop_assert!((us[i] - u1[i] - a * u2[i]).abs() < 1e-12);
        }
        let lo = f1.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = f1.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(u1.iter().all(|v| *v >= lo - 1e-9 && *v <= hi + 1e-9));
    }
}
