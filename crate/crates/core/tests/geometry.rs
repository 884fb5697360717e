use neumann_lab::geometry::{self, manifold::stereo_from_polar, ManifoldSpec};
use neumann_lab::linalg::{self, Vec2};
use proptest::prelude::*;
use std::f64::consts::{FRAC_PI_4, PI};

type Scalar = Box<dyn Fn(&Vec2) -> f64>;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// Levi-Civita symbols of g = λ² δ with log λ = log 2R − log(1 + |x|²).
fn conformal_christoffel(x: &Vec2) -> [[[f64; 2]; 2]; 2] {
    let s = 1.0 + x[0] * x[0] + x[1] * x[1];
    let d = [-2.0 * x[0] / s, -2.0 * x[1] / s];
    let mut g = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let dik = if i == k { 1.0 } else { 0.0 };
                let djk = if j == k { 1.0 } else { 0.0 };
                let dij = if i == j { 1.0 } else { 0.0 };
                g[k][i][j] = dik * d[j] + djk * d[i] - dij * d[k];
            }
        }
    }
    g
}

fn unit(m: &ManifoldSpec, x: &Vec2, v: Vec2) -> Vec2 {
    let n = linalg::norm_g(&m.metric(x), &v, m.dim());
    linalg::scale(&v, 1.0 / n)
}

#[test]
fn flat_charts_have_no_christoffel_symbols() {
    for (m, x) in
        [(ManifoldSpec::disk(1.0), [0.3, -0.2]), (ManifoldSpec::annulus(1.0, 2.0), [0.0, 1.4]), (ManifoldSpec::half_line(true), [0.7, 0.0])]
    {
        let g = geometry::christoffel(&m, &x).unwrap();
        assert!(g.iter().flatten().flatten().all(|v| v.abs() < 1e-12), "{}", m.name());
    }
}

#[test]
fn polar_hemisphere_christoffel() {
    let m = ManifoldSpec::hemisphere_polar(1.0);
    let g = geometry::christoffel(&m, &[FRAC_PI_4, 0.4]).unwrap();
    assert!(close(g[0][1][1], -0.5, 1e-6), "{}", g[0][1][1]);
    // Γ^ϕ_{θϕ} = cot θ
    assert!(close(g[1][0][1], 1.0, 1e-6));
    assert!(close(g[0][0][0], 0.0, 1e-9));
}

#[test]
fn gradient_hessian_generator_examples() {
    let disk = ManifoldSpec::disk(1.0);
    let f = |y: &Vec2| y[0];
    let x = [0.2, 0.1];
    let g = geometry::gradient(&disk, &f, &x).unwrap();
    assert!(close(g[0], 1.0, 1e-9) && close(g[1], 0.0, 1e-9));
    let h = geometry::hessian(&disk, &f, &x).unwrap();
    assert!(h.iter().flatten().all(|v| v.abs() < 1e-6));
    assert!(geometry::generator_l(&disk, &f, &x).unwrap().abs() < 1e-6);

    let ou = ManifoldSpec::half_line(true);
    let sq = |y: &Vec2| y[0] * y[0];
    assert!(geometry::generator_l(&ou, &sq, &[1.0, 0.0]).unwrap().abs() < 1e-6);

    let hemi = ManifoldSpec::upper_hemisphere(1.0);
    let sin2 = |y: &Vec2| {
        let r2 = y[0] * y[0] + y[1] * y[1];
        4.0 * r2 / ((1.0 + r2) * (1.0 + r2))
    };
    for theta in [0.3, FRAC_PI_4, 1.2] {
        let x = stereo_from_polar(theta, 0.7);
        let l = geometry::generator_l(&hemi, &sin2, &x).unwrap();
        let want = 6.0 * theta.cos().powi(2) - 2.0;
        assert!(close(l, want, 1e-5), "θ={theta}: {l} vs {want}");
    }
}

#[test]
fn ricci_on_space_forms() {
    let annulus = ManifoldSpec::annulus(1.0, 2.0);
    assert!(geometry::ricci(&annulus, &[0.0, 1.5], &[0.6, 0.8]).unwrap().abs() < 1e-9);
    for (radius, want) in [(1.0, 1.0), (2.0, 0.25)] {
        let m = ManifoldSpec::upper_hemisphere(radius);
        for x in [[0.1, 0.2], [-0.4, 0.3], [0.0, 0.0]] {
            for v in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
                let v = unit(&m, &x, v);
                let r = geometry::ricci(&m, &x, &v).unwrap();
                assert!(close(r, want, 1e-3 * want), "R={radius} x={x:?}: {r}");
            }
        }
    }
    let polar = ManifoldSpec::hemisphere_polar(1.0);
    let x = [1.0, 2.0];
    let v = unit(&polar, &x, [0.3, 1.0]);
    assert!(close(geometry::ricci(&polar, &x, &v).unwrap(), 1.0, 1e-3));
}

#[test]
fn inward_normals() {
    let hl = ManifoldSpec::half_line(false);
    let n = geometry::inward_normal(&hl, &[0.0, 0.0]).unwrap();
    assert!(close(n[0], 1.0, 1e-9));

    let r = 2.0;
    let disk = ManifoldSpec::disk(r);
    let p = [r * 0.6, r * 0.8];
    let n = geometry::inward_normal(&disk, &p).unwrap();
    assert!(close(n[0], -0.6, 1e-6) && close(n[1], -0.8, 1e-6));

    let annulus = ManifoldSpec::annulus(1.0, 2.0);
    let n = geometry::inward_normal(&annulus, &[0.0, 1.0]).unwrap();
    assert!(close(n[0], 0.0, 1e-6) && close(n[1], 1.0, 1e-6));
}

#[test]
fn second_fundamental_form_catalog() {
    let cases: Vec<(ManifoldSpec, Vec2, f64)> = vec![
        (ManifoldSpec::disk(1.0), [1.0, 0.0], 1.0),
        (ManifoldSpec::disk(2.0), [0.0, -2.0], 0.5),
        (ManifoldSpec::annulus(1.0, 2.0), [0.0, 1.0], -1.0),
        (ManifoldSpec::annulus(1.0, 2.0), [2.0, 0.0], 0.5),
        (ManifoldSpec::upper_hemisphere(1.0), [0.6, 0.8], 0.0),
    ];
    for (m, x, want) in cases {
        let t = geometry::unit_tangent(&m, &x).unwrap();
        let ii = geometry::second_fundamental_form(&m, &x, &t, &t).unwrap();
        assert!(close(ii, want, 1e-3), "{} at {x:?}: {ii}", m.name());
    }
    let hl = ManifoldSpec::half_line(false);
    assert_eq!(geometry::second_fundamental_form(&hl, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
}

#[test]
fn bochner_identity_examples() {
    let disk = ManifoldSpec::disk(1.0);
    let g = geometry::gamma2_check(&disk, &|y: &Vec2| y[0] * y[0], &[0.1, 0.3]).unwrap();
    assert!(close(g.lhs, 4.0, 1e-4) && close(g.rhs, 4.0, 1e-4), "{g:?}");

    let ou = ManifoldSpec::half_line(true);
    for x in [0.5, 1.0, 2.5] {
        let g = geometry::gamma2_check(&ou, &|y: &Vec2| y[0], &[x, 0.0]).unwrap();
        assert!(close(g.lhs, 1.0, 1e-6) && close(g.rhs, 1.0, 1e-6), "{g:?}");
    }

    // For f = sin²θ on the unit sphere at θ = π/4: Ric(∇f,∇f) = sin²2θ = 1,
    // ‖Hess f‖² = (2cos2θ)² + (2cos²θ)² = 1.
    let hemi = ManifoldSpec::hemisphere_polar(1.0);
    let f = |y: &Vec2| y[0].sin().powi(2);
    let g = geometry::gamma2_check(&hemi, &f, &[FRAC_PI_4, 1.0]).unwrap();
    let h = hemi.h_geo;
    assert!(close(g.lhs, 2.0, 10.0 * h * h * 2.0 + 1e-5), "{g:?}");
    assert!(close(g.rhs, 2.0, 1e-5), "{g:?}");
}

#[test]
fn bochner_identity_on_sampled_points() {
    let cases =
        [ManifoldSpec::disk(1.0), ManifoldSpec::annulus(1.0, 2.0), ManifoldSpec::upper_hemisphere(1.0), ManifoldSpec::half_line(true)];
    for m in &cases {
        let fs: [Scalar; 3] = [
            Box::new(|y: &Vec2| y[0]),
            Box::new(|y: &Vec2| y[0] * y[0] + 0.5 * y[1]),
            Box::new(|y: &Vec2| (0.7 * y[0]).sin() + y[1] * y[1]),
        ];
        let mut used = 0;
        for x in m.grid_points(12) {
            if !m.in_chart_interior(&x) || geometry::stencil(m).clipped(&x, m.dim()) {
                continue;
            }
            for f in &fs {
                let g = geometry::gamma2_check(m, f, &x).unwrap();
                assert!((g.lhs - g.rhs).abs() <= 1e-4 * (1.0 + g.rhs.abs()), "{} at {x:?}: {g:?}", m.name());
            }
            used += 1;
        }
        assert!(used >= 8, "{}: {used} points", m.name());
    }
}

fn hemisphere_point() -> impl Strategy<Value = Vec2> {
    (0.05..1.5f64, 0.0..2.0 * PI).prop_map(|(t, a)| stereo_from_polar(t, a))
}

fn disk_point(r: f64) -> impl Strategy<Value = Vec2> {
    (0.0..0.99f64, 0.0..2.0 * PI).prop_map(move |(s, a)| [r * s * a.cos(), r * s * a.sin()])
}

fn annulus_point() -> impl Strategy<Value = Vec2> {
    (1.0..2.0f64, 0.0..2.0 * PI).prop_map(|(r, a)| [r * a.cos(), r * a.sin()])
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn christoffel_symmetric_and_matches_conformal_formula(x in hemisphere_point()) {
        let m = ManifoldSpec::upper_hemisphere(1.0);
        let g = geometry::christoffel(&m, &x).unwrap();
        let want = conformal_christoffel(&x);
        for k in 0..2 {
            prop_assert!((g[k][0][1] - g[k][1][0]).abs() < 1e-12);
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((g[k][i][j] - want[k][i][j]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn metric_is_spd(x in hemisphere_point(), y in annulus_point()) {
        prop_assert!(linalg::is_spd(&ManifoldSpec::upper_hemisphere(1.5).metric(&x), 2));
        prop_assert!(linalg::is_spd(&ManifoldSpec::annulus(1.0, 2.0).metric(&y), 2));
    }

    #[test]
    fn normals_are_unit_and_inward(a in 0.0..2.0 * PI, which in 0usize..4) {
        let (m, x) = match which {
            0 => (ManifoldSpec::disk(1.5), [1.5 * a.cos(), 1.5 * a.sin()]),
            1 => (ManifoldSpec::annulus(1.0, 2.0), [a.cos(), a.sin()]),
            2 => (ManifoldSpec::annulus(1.0, 2.0), [2.0 * a.cos(), 2.0 * a.sin()]),
            _ => (ManifoldSpec::upper_hemisphere(1.0), [a.cos(), a.sin()]),
        };
        let n = geometry::inward_normal(&m, &x).unwrap();
        let len = linalg::norm_g(&m.metric(&x), &n, 2);
        prop_assert!((len - 1.0).abs() < 1e-8, "{len}");
        let db = geometry::stencil(&m).partials(&|y: &Vec2| m.boundary_fn(y), &x, 2);
        prop_assert!(db[0] * n[0] + db[1] * n[1] > 0.0);
        // Stepping along N enters M.
        prop_assert!(m.boundary_fn(&linalg::add(&x, &linalg::scale(&n, 1e-3))) > 0.0);
    }

    #[test]
    fn disk_distance_axioms(x in disk_point(1.0), y in disk_point(1.0), z in disk_point(1.0)) {
        distance_axioms(&ManifoldSpec::disk(1.0), &x, &y, &z, 1e-12)?;
    }

    #[test]
    fn hemisphere_distance_axioms(x in hemisphere_point(), y in hemisphere_point(), z in hemisphere_point()) {
        distance_axioms(&ManifoldSpec::upper_hemisphere(1.0), &x, &y, &z, 1e-12)?;
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn annulus_distance_axioms(x in annulus_point(), y in annulus_point(), z in annulus_point()) {
        distance_axioms(&ManifoldSpec::annulus(1.0, 2.0), &x, &y, &z, 2e-3)?;
    }
}

fn distance_axioms(m: &ManifoldSpec, x: &Vec2, y: &Vec2, z: &Vec2, tol: f64) -> Result<(), TestCaseError> {
    let dxy = m.distance(x, y);
    prop_assert!(dxy >= 0.0);
    prop_assert!(m.distance(x, x) <= tol);
    prop_assert!((dxy - m.distance(y, x)).abs() <= tol);
    prop_assert!(dxy <= m.distance(x, z) + m.distance(z, y) + tol, "{dxy}");
    if linalg::euclid(&linalg::sub(x, y), 2) > 1e-3 {
        prop_assert!(dxy > 0.0);
    }
    Ok(())
}
