//! Fixed-size helpers for the 1×1 and 2×2 tensors used throughout the crate.
//!
//! Points, tangent vectors and bilinear forms always occupy two slots; a
//! 1-dimensional chart only reads index 0 and keeps the padding slots at the
//! identity so that inverses stay well defined.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const ZERO2: Vec2 = [0.0; 2];
pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn add(a: &Vec2, b: &Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: &Vec2, b: &Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(a: &Vec2, s: f64) -> Vec2 {
    [a[0] * s, a[1] * s]
}

#[inline]
pub fn mat_vec(m: &Mat2, v: &Vec2, dim: usize) -> Vec2 {
    if dim == 1 {
        [m[0][0] * v[0], 0.0]
    } else {
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }
}

/// `g(u, v)` for a symmetric form `g`.
#[inline]
pub fn form(g: &Mat2, u: &Vec2, v: &Vec2, dim: usize) -> f64 {
    if dim == 1 {
        g[0][0] * u[0] * v[0]
    } else {
        g[0][0] * u[0] * v[0] + g[0][1] * (u[0] * v[1] + u[1] * v[0]) + g[1][1] * u[1] * v[1]
    }
}

#[inline]
pub fn norm_g(g: &Mat2, u: &Vec2, dim: usize) -> f64 {
    form(g, u, u, dim).max(0.0).sqrt()
}

#[inline]
pub fn euclid(a: &Vec2, dim: usize) -> f64 {
    if dim == 1 {
        a[0].abs()
    } else {
        a[0].hypot(a[1])
    }
}

#[inline]
pub fn det(m: &Mat2, dim: usize) -> f64 {
    if dim == 1 {
        m[0][0]
    } else {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }
}

pub fn inverse(m: &Mat2, dim: usize) -> Option<Mat2> {
    let d = det(m, dim);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    if dim == 1 {
        return Some([[1.0 / m[0][0], 0.0], [0.0, 1.0]]);
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

pub fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2, dim: usize) -> Mat2 {
    let mut out = if dim == 1 { IDENTITY2 } else { [[0.0; 2]; 2] };
    for i in 0..dim {
        for j in 0..dim {
            out[i][j] = (0..dim).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Mat2, dim: usize) -> f64 {
    if dim == 1 {
        return m[0][0];
    }
    let tr = 0.5 * (m[0][0] + m[1][1]);
    let diff = 0.5 * (m[0][0] - m[1][1]);
    let off = 0.5 * (m[0][1] + m[1][0]);
    tr - diff.hypot(off)
}

pub fn is_spd(m: &Mat2, dim: usize) -> bool {
    let sym = dim == 1 || (m[0][1] - m[1][0]).abs() <= 1e-12 * (1.0 + m[0][1].abs());
    sym && min_eigenvalue(m, dim) > 0.0
}

/// Smallest `λ` with `det(a − λ g) = 0`, for symmetric `a` and SPD `g`.
pub fn min_generalized_eigenvalue(a: &Mat2, g: &Mat2, dim: usize) -> f64 {
    if dim == 1 {
        return a[0][0] / g[0][0];
    }
    let a12 = 0.5 * (a[0][1] + a[1][0]);
    let qa = det(g, 2);
    let qb = -(a[0][0] * g[1][1] + a[1][1] * g[0][0] - 2.0 * a12 * g[0][1]);
    let qc = a[0][0] * a[1][1] - a12 * a12;
    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
    // Stable pair of roots; the smaller one is returned.
    let q = -0.5 * (qb + qb.signum() * disc);
    if q == 0.0 {
        return 0.0;
    }
    let r1 = q / qa;
    let r2 = qc / q;
    r1.min(r2)
}

/// Orthonormalises the columns of `frame` with respect to `g` (modified
/// Gram–Schmidt). Column `a` is `(frame[0][a], frame[1][a])`.
pub fn gram_schmidt(frame: &mut Mat2, g: &Mat2, dim: usize) {
    if dim == 1 {
        frame[0][0] = frame[0][0].signum() / g[0][0].sqrt();
        if frame[0][0] == 0.0 {
            frame[0][0] = 1.0 / g[0][0].sqrt();
        }
        return;
    }
    let mut c0 = [frame[0][0], frame[1][0]];
    let n0 = norm_g(g, &c0, 2);
    c0 = scale(&c0, 1.0 / n0);
    let mut c1 = [frame[0][1], frame[1][1]];
    let p = form(g, &c0, &c1, 2);
    c1 = sub(&c1, &scale(&c0, p));
    let n1 = norm_g(g, &c1, 2);
    c1 = scale(&c1, 1.0 / n1);
    *frame = [[c0[0], c1[0]], [c0[1], c1[1]]];
}

/// A `g`-orthonormal frame built from the coordinate axes.
pub fn orthonormal_frame(g: &Mat2, dim: usize) -> Mat2 {
    let mut f = IDENTITY2;
    gram_schmidt(&mut f, g, dim);
    f
}

/// Largest deviation of `frameᵀ g frame` from the identity.
pub fn frame_defect(frame: &Mat2, g: &Mat2, dim: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..dim {
        for b in 0..dim {
            let ca = [frame[0][a], frame[1][a]];
            let cb = [frame[0][b], frame[1][b]];
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((form(g, &ca, &cb, dim) - target).abs());
        }
    }
    worst
}
