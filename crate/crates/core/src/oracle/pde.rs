//! Crank–Nicolson Neumann solvers on an interval.
//!
//! The generator is written in flux form
//! `Lu = ρ⁻¹ (ρ u')' − q u`, discretised vertex-centred with half cells at
//! both ends so that the zero-flux condition is built in and the scheme is
//! symmetric in the weighted inner product `Σ w_i u_i v_i`. With `ρ = e^V`
//! this is `u'' + V'u'`; with `ρ = r`, `q = m̂²/r²` it is an angular mode of
//! the planar Laplacian.

use std::sync::Arc;

use super::OracleError;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Number of leading CN steps replaced by two backward-Euler half steps.
pub const RANNACHER_STEPS: usize = 2;

#[derive(Clone)]
pub struct PdeGrid {
    pub a: f64,
    pub b: f64,
    /// Number of cells; there are `m + 1` nodes.
    pub m: usize,
    /// Time step.
    pub k: f64,
    pub nodes: Vec<f64>,
    /// Cell masses `w_i`.
    pub mass: Vec<f64>,
    /// Face conductances `c_{i+½}`, length `m`.
    pub conductance: Vec<f64>,
    /// Zero-order coefficient `q_i`.
    pub sink: Vec<f64>,
    rho: Profile,
    q: Profile,
}

impl std::fmt::Debug for PdeGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PdeGrid").field("a", &self.a).field("b", &self.b).field("m", &self.m).field("k", &self.k).finish()
    }
}

impl PdeGrid {
    /// `u_t = u'' + V'u'` on `[a, b]` with weight `e^V`.
    pub fn with_potential(a: f64, b: f64, m: usize, k: f64, v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Self, OracleError> {
        Self::weighted(a, b, m, k, Arc::new(move |x| v(x).exp()), Arc::new(|_| 0.0))
    }

    pub fn weighted(a: f64, b: f64, m: usize, k: f64, rho: Profile, q: Profile) -> Result<Self, OracleError> {
        if !(b > a) || m < 4 || !(k > 0.0) || !k.is_finite() {
            return Err(OracleError::InvalidGrid(format!("[{a}, {b}], m = {m}, k = {k}")));
        }
        let dx = (b - a) / m as f64;
        let nodes: Vec<f64> = (0..=m).map(|i| a + i as f64 * dx).collect();
        let mut mass: Vec<f64> = nodes.iter().map(|&x| rho(x) * dx).collect();
        mass[0] *= 0.5;
        mass[m] *= 0.5;
        let conductance: Vec<f64> = (0..m).map(|i| rho(a + (i as f64 + 0.5) * dx) / dx).collect();
        let sink: Vec<f64> = nodes.iter().map(|&x| q(x)).collect();
        if mass.iter().chain(&conductance).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(OracleError::InvalidGrid("weight must be positive and finite".into()));
        }
        Ok(Self { a, b, m, k, nodes, mass, conductance, sink, rho, q })
    }

    /// The same problem with `factor` times as many cells and a step `k / factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self::weighted(self.a, self.b, self.m * factor, self.k / factor as f64, self.rho.clone(), self.q.clone())
            .expect("refinement of a valid grid")
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / self.m as f64
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// `Lu` at every node.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let n = self.m + 1;
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut flux = 0.0;
            if i > 0 {
                flux -= self.conductance[i - 1] * (u[i] - u[i - 1]);
            }
            if i < self.m {
                flux += self.conductance[i] * (u[i + 1] - u[i]);
            }
            out[i] = flux / self.mass[i] - self.sink[i] * u[i];
        }
        out
    }

    /// Weighted total `Σ w_i u_i`.
    pub fn mu_mass(&self, u: &[f64]) -> f64 {
        self.mass.iter().zip(u).map(|(w, v)| w * v).sum()
    }

    fn steps_for(&self, t: f64) -> Result<usize, OracleError> {
        if t < 0.0 || !t.is_finite() {
            return Err(OracleError::NotOnTimeGrid { t, k: self.k });
        }
        let n = (t / self.k).round();
        if (n * self.k - t).abs() > 1e-9 * t.max(1.0) {
            return Err(OracleError::NotOnTimeGrid { t, k: self.k });
        }
        Ok(n as usize)
    }

    /// Snapshots of the discrete `P_t f` at the requested times.
    pub fn solve(&self, f: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>, OracleError> {
        if f.len() != self.m + 1 {
            return Err(OracleError::InvalidGrid(format!("data has {} values for {} nodes", f.len(), self.m + 1)));
        }
        let steps: Vec<usize> = times.iter().map(|&t| self.steps_for(t)).collect::<Result<_, _>>()?;
        let last = steps.iter().copied().max().unwrap_or(0);
        // (W − k/2 S) is shared by CN steps and backward-Euler half steps.
        let half = 0.5 * self.k;
        let n = self.m + 1;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut s = -self.sink[i] * self.mass[i];
            if i > 0 {
                s -= self.conductance[i - 1];
            }
            if i < self.m {
                s -= self.conductance[i];
            }
            diag[i] = self.mass[i] - half * s;
        }
        for i in 0..self.m {
            off[i] = -half * self.conductance[i];
        }
        let lu = Tridiag::factor(&diag, &off);

        let mut u = f.to_vec();
        let mut out = vec![Vec::new(); times.len()];
        let mut record = |step: usize, u: &[f64]| {
            for (j, s) in steps.iter().enumerate() {
                if *s == step {
                    out[j] = u.to_vec();
                }
            }
        };
        record(0, &u);
        let mut rhs = vec![0.0; n];
        for step in 1..=last {
            if step <= RANNACHER_STEPS {
                for _ in 0..2 {
                    for i in 0..n {
                        rhs[i] = self.mass[i] * u[i];
                    }
                    lu.solve(&mut rhs);
                    u.copy_from_slice(&rhs);
                }
            } else {
                let lu_u = self.apply(&u);
                for i in 0..n {
                    rhs[i] = self.mass[i] * (u[i] + half * lu_u[i]);
                }
                lu.solve(&mut rhs);
                u.copy_from_slice(&rhs);
            }
            record(step, &u);
        }
        Ok(out)
    }
}

/// LU factors of a symmetric tridiagonal matrix (Thomas algorithm).
struct Tridiag {
    off: Vec<f64>,
    pivot: Vec<f64>,
}

impl Tridiag {
    fn factor(diag: &[f64], off: &[f64]) -> Self {
        let mut pivot = diag.to_vec();
        for i in 1..diag.len() {
            pivot[i] -= off[i - 1] * off[i - 1] / pivot[i - 1];
        }
        Self { off: off.to_vec(), pivot }
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 1..n {
            b[i] -= self.off[i - 1] / self.pivot[i - 1] * b[i - 1];
        }
        b[n - 1] /= self.pivot[n - 1];
        for i in (0..n - 1).rev() {
            b[i] = (b[i] - self.off[i] * b[i + 1]) / self.pivot[i];
        }
    }
}

/// Tabulated `P_t f` at a single time on the grid nodes.
pub fn neumann_pde_1d(grid: &PdeGrid, f: &[f64], t: f64) -> Result<Vec<f64>, OracleError> {
    Ok(grid.solve(f, &[t])?.remove(0))
}

/// A grid function extrapolated over two refinement pairs; the spread
/// between the two extrapolants bounds the error pointwise.
#[derive(Debug, Clone)]
pub struct Certified {
    pub nodes: Vec<f64>,
    /// Extrapolation from levels `(m, 2m)`.
    pub coarse: Vec<f64>,
    /// Extrapolation from levels `(2m, 4m)`; the reported value.
    pub fine: Vec<f64>,
}

impl Certified {
    /// Combines level values sampled on the coarse nodes.
    pub fn from_levels(nodes: Vec<f64>, l1: &[f64], l2: &[f64], l4: &[f64]) -> Self {
        let coarse = l1.iter().zip(l2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
        let fine = l2.iter().zip(l4).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
        Self { nodes, coarse, fine }
    }

    pub fn values(&self) -> &[f64] {
        &self.fine
    }

    pub fn max_error(&self) -> f64 {
        self.coarse.iter().zip(&self.fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Value and error bound at `x`.
    pub fn at(&self, x: f64) -> (f64, f64) {
        let a = lagrange(&self.nodes, &self.fine, x, 0);
        let b = lagrange(&self.nodes, &self.coarse, x, 0);
        (a, (a - b).abs())
    }

    /// First derivative and error bound at `x`.
    pub fn derivative_at(&self, x: f64) -> (f64, f64) {
        let a = lagrange(&self.nodes, &self.fine, x, 1);
        let b = lagrange(&self.nodes, &self.coarse, x, 1);
        (a, (a - b).abs())
    }
}

/// Six-point Lagrange interpolation (`order = 0`) or its derivative
/// (`order = 1`) on uniform nodes.
pub fn lagrange(nodes: &[f64], values: &[f64], x: f64, order: u8) -> f64 {
    const P: usize = 6;
    let n = nodes.len();
    let dx = nodes[1] - nodes[0];
    let pos = ((x - nodes[0]) / dx).floor() as isize;
    let start = (pos - (P as isize / 2 - 1)).clamp(0, (n - P) as isize) as usize;
    let xs = &nodes[start..start + P];
    let ys = &values[start..start + P];
    let mut total = 0.0;
    for j in 0..P {
        let denom: f64 = (0..P).filter(|&i| i != j).map(|i| xs[j] - xs[i]).product();
        let basis = if order == 0 {
            (0..P).filter(|&i| i != j).map(|i| x - xs[i]).product::<f64>()
        } else {
            (0..P).filter(|&i| i != j).map(|l| (0..P).filter(|&i| i != j && i != l).map(|i| x - xs[i]).product::<f64>()).sum::<f64>()
        };
        total += ys[j] * basis / denom;
    }
    total
}

/// Solves on `grid`, `grid.refined(2)` and `grid.refined(4)` and certifies
/// `P_t f` on the coarse nodes.
pub fn certified_solve(grid: &PdeGrid, f: impl Fn(f64) -> f64, times: &[f64]) -> Result<Vec<Certified>, OracleError> {
    let g2 = grid.refined(2);
    let g4 = grid.refined(4);
    let s1 = grid.solve(&grid.sample(&f), times)?;
    let s2 = g2.solve(&g2.sample(&f), times)?;
    let s4 = g4.solve(&g4.sample(&f), times)?;
    Ok((0..times.len())
        .map(|j| {
            let l2: Vec<f64> = s2[j].iter().step_by(2).copied().collect();
            let l4: Vec<f64> = s4[j].iter().step_by(4).copied().collect();
            Certified::from_levels(grid.nodes.clone(), &s1[j], &l2, &l4)
        })
        .collect())
}

/// Radial profile of `P_t` applied to `f(r) cos(m̂ ϑ)` on the flat annulus.
pub fn annulus_mode_solver(
    r_in: f64,
    r_out: f64,
    mode: u32,
    f_radial: impl Fn(f64) -> f64,
    times: &[f64],
    cells: usize,
    k: f64,
) -> Result<Vec<Certified>, OracleError> {
    if mode > 2 {
        return Err(OracleError::Unsupported(format!("angular mode {mode}")));
    }
    let m2 = (mode * mode) as f64;
    let grid = PdeGrid::weighted(r_in, r_out, cells, k, Arc::new(|r| r), Arc::new(move |r| m2 / (r * r)))?;
    certified_solve(&grid, f_radial, times)
}
