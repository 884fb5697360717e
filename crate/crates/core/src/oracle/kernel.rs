//! Heat kernels of one-dimensional Neumann generators with respect to `μ`.
//!
//! The generator `Lu = e^{-V}(e^V u')'` on `[a, b]` is discretised by a
//! Galerkin method in the basis `e^{-V/2} P_k`, `P_k` Legendre polynomials
//! on `[a, b]`. The Neumann condition is natural in the weak form and the
//! mass matrix is diagonal, so `e^{tL}` follows from one symmetric
//! eigendecomposition. Accuracy is certified by comparing two degrees.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::pde::Profile;
use super::quadrature::GaussLegendre;
use super::OracleError;

pub const ASYMMETRY_TOL: f64 = 1e-8;
pub const CONSERVATION_TOL: f64 = 1e-8;
pub const DEFAULT_DEGREE: usize = 96;

/// Potential data of a 1-D Neumann problem.
#[derive(Clone)]
pub struct KernelSpec {
    pub a: f64,
    pub b: f64,
    pub v: Profile,
    pub dv: Profile,
}

impl std::fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KernelSpec").field("a", &self.a).field("b", &self.b).finish()
    }
}

impl KernelSpec {
    /// `V(x) = −k x²/2` on `[a, b]`.
    pub fn quadratic(a: f64, b: f64, k: f64) -> Self {
        Self { a, b, v: Arc::new(move |x| -0.5 * k * x * x), dv: Arc::new(move |x| -k * x) }
    }

    pub fn flat(a: f64, b: f64) -> Self {
        Self { a, b, v: Arc::new(|_| 0.0), dv: Arc::new(|_| 0.0) }
    }
}

/// Legendre values and derivatives `P_k(s), P_k'(s)` for `k ≤ n`.
fn legendre_table(n: usize, s: f64, p: &mut [f64], dp: &mut [f64]) {
    p[0] = 1.0;
    dp[0] = 0.0;
    if n == 0 {
        return;
    }
    p[1] = s;
    dp[1] = 1.0;
    for k in 1..n {
        p[k + 1] = ((2 * k + 1) as f64 * s * p[k] - k as f64 * p[k - 1]) / (k + 1) as f64;
        dp[k + 1] = dp[k - 1] + (2 * k + 1) as f64 * p[k];
    }
}

/// Spectral decomposition of the Galerkin generator.
#[derive(Clone)]
pub struct SpectralKernel {
    pub spec: KernelSpec,
    pub degree: usize,
    /// `λ_j ≥ 0` with `L u_j = −λ_j u_j`.
    pub eigenvalues: DVector<f64>,
    /// Coefficients of `u_j` (columns) in the Legendre basis.
    coeffs: DMatrix<f64>,
    /// `∫ e^V dx`.
    pub z: f64,
}

impl std::fmt::Debug for SpectralKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralKernel").field("spec", &self.spec).field("degree", &self.degree).finish()
    }
}

impl SpectralKernel {
    pub fn new(spec: &KernelSpec, degree: usize) -> Self {
        let (a, b) = (spec.a, spec.b);
        let n = degree + 1;
        let half = 0.5 * (b - a);
        let gl = GaussLegendre::new(2 * degree + 24);
        let mut stiff = DMatrix::<f64>::zeros(n, n);
        let (mut p, mut dp) = (vec![0.0; n], vec![0.0; n]);
        let mut row = vec![0.0; n];
        let mut z = 0.0;
        for (s, w) in gl.nodes.iter().zip(&gl.weights) {
            let x = a + half * (s + 1.0);
            let wx = w * half;
            z += wx * (spec.v)(x).exp();
            legendre_table(degree, *s, &mut p, &mut dp);
            let dvx = 0.5 * (spec.dv)(x);
            for k in 0..n {
                row[k] = dp[k] / half - dvx * p[k];
            }
            for k in 0..n {
                for l in k..n {
                    stiff[(k, l)] += wx * row[k] * row[l];
                }
            }
        }
        // Diagonal mass (b − a)/(2k+1), symmetrically scaled out.
        let msq: Vec<f64> = (0..n).map(|k| ((b - a) / (2 * k + 1) as f64).sqrt()).collect();
        for k in 0..n {
            for l in k..n {
                let v = stiff[(k, l)] / (msq[k] * msq[l]);
                stiff[(k, l)] = v;
                stiff[(l, k)] = v;
            }
        }
        let eig = stiff.symmetric_eigen();
        let mut coeffs = eig.eigenvectors;
        for k in 0..n {
            for j in 0..n {
                coeffs[(k, j)] /= msq[k];
            }
        }
        Self { spec: spec.clone(), degree, eigenvalues: eig.eigenvalues, coeffs, z }
    }

    /// Values `u_j(x)` of all eigenfunctions, normalised in `L²(e^V dx)`.
    pub fn modes(&self, x: f64) -> DVector<f64> {
        let n = self.degree + 1;
        let (mut p, mut dp) = (vec![0.0; n], vec![0.0; n]);
        let s = (2.0 * x - self.spec.a - self.spec.b) / (self.spec.b - self.spec.a);
        legendre_table(self.degree, s, &mut p, &mut dp);
        let scale = (-0.5 * (self.spec.v)(x)).exp();
        self.coeffs.tr_mul(&DVector::from_vec(p)) * scale
    }

    /// `p_t(x_i, y_j)` with respect to the normalised `μ`.
    pub fn kernel_matrix(&self, xs: &[f64], ys: &[f64], t: f64) -> DMatrix<f64> {
        let decay = self.eigenvalues.map(|l| (-l * t).exp() * self.z);
        let ux = DMatrix::from_columns(&xs.iter().map(|x| self.modes(*x).component_mul(&decay)).collect::<Vec<_>>());
        let uy = DMatrix::from_columns(&ys.iter().map(|y| self.modes(*y)).collect::<Vec<_>>());
        ux.tr_mul(&uy)
    }

    pub fn kernel(&self, x: f64, y: f64, t: f64) -> f64 {
        self.kernel_matrix(&[x], &[y], t)[(0, 0)]
    }

    /// `P_t f` at `xs` by projecting `f` on the eigenfunctions.
    pub fn apply(&self, f: impl Fn(f64) -> f64, xs: &[f64], t: f64) -> Vec<f64> {
        let gl = GaussLegendre::new(2 * self.degree + 24);
        let half = 0.5 * (self.spec.b - self.spec.a);
        let mut proj = DVector::<f64>::zeros(self.degree + 1);
        for (s, w) in gl.nodes.iter().zip(&gl.weights) {
            let y = self.spec.a + half * (s + 1.0);
            proj += self.modes(y) * (w * half * (self.spec.v)(y).exp() * f(y));
        }
        let decayed = proj.component_mul(&self.eigenvalues.map(|l| (-l * t).exp()));
        xs.iter().map(|x| self.modes(*x).dot(&decayed)).collect()
    }

    /// Normalised `μ` density `e^V / Z`.
    pub fn mu_density(&self, x: f64) -> f64 {
        (self.spec.v)(x).exp() / self.z
    }
}

/// Kernel tabulated on a set of nodes, certified against a lower degree.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub nodes: Vec<f64>,
    pub t: f64,
    pub p: DMatrix<f64>,
    /// Largest difference to the lower-degree kernel.
    pub error: f64,
}

/// Heat kernel on `nodes × nodes` at time `t > 0`. Rejected if the result is
/// not symmetric or does not conserve mass.
pub fn heat_kernel_1d(spec: &KernelSpec, nodes: &[f64], t: f64) -> Result<KernelTable, OracleError> {
    let hi = SpectralKernel::new(spec, DEFAULT_DEGREE);
    let lo = SpectralKernel::new(spec, DEFAULT_DEGREE * 3 / 4);
    kernel_table(&hi, &lo, nodes, t)
}

pub fn kernel_table(hi: &SpectralKernel, lo: &SpectralKernel, nodes: &[f64], t: f64) -> Result<KernelTable, OracleError> {
    if !(t > 0.0) {
        return Err(OracleError::InvalidGrid(format!("kernel time {t} must be positive")));
    }
    let p = hi.kernel_matrix(nodes, nodes, t);
    let scale = p.amax().max(1.0);
    let asym = (&p - p.transpose()).amax() / scale;
    if asym > ASYMMETRY_TOL {
        return Err(OracleError::Asymmetric(asym));
    }
    let error = (&p - lo.kernel_matrix(nodes, nodes, t)).amax();
    // ∫ p_t(x, y) μ(dy) = 1 by quadrature in y.
    let gl = GaussLegendre::new(2 * hi.degree + 24);
    let half = 0.5 * (hi.spec.b - hi.spec.a);
    let ys: Vec<f64> = gl.nodes.iter().map(|s| hi.spec.a + half * (s + 1.0)).collect();
    let py = hi.kernel_matrix(nodes, &ys, t);
    for i in 0..nodes.len() {
        let mass: f64 = ys.iter().zip(&gl.weights).enumerate().map(|(j, (y, w))| w * half * hi.mu_density(*y) * py[(i, j)]).sum();
        if (mass - 1.0).abs() > CONSERVATION_TOL {
            return Err(OracleError::NotNormalized(mass));
        }
    }
    Ok(KernelTable { nodes: nodes.to_vec(), t, p, error })
}

/// Kernel of the reflected OU process `dX = √2 dB − X dt` on `[0, ∞)`
/// with respect to the half-Gaussian.
pub fn reflected_ou_kernel(x: f64, y: f64, t: f64) -> f64 {
    let a = (-t).exp();
    let var = 1.0 - a * a;
    let q = |z: f64| (-(z - x * a).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let mu = (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * y * y).exp();
    (q(y) + q(-y)) / mu
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ou_spectrum_and_kernel() {
        // Reflected OU on a long window: eigenvalues 0, 2, 4, ... (even Hermite modes).
        let long = SpectralKernel::new(&KernelSpec::quadratic(0.0, 12.0, 1.0), 140);
        let mut ev: Vec<f64> = long.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for j in 0..4 {
            assert!((ev[j] - 2.0 * j as f64).abs() < 1e-8, "{:?}", &ev[..4]);
        }
        let k = SpectralKernel::new(&KernelSpec::quadratic(0.0, 6.0, 1.0), DEFAULT_DEGREE);
        for (x, y) in [(0.0, 0.0), (0.5, 1.5), (2.0, 0.3), (1.0, 2.5)] {
            let exact = reflected_ou_kernel(x, y, 0.3);
            assert!((k.kernel(x, y, 0.3) - exact).abs() < 1e-6 * exact.max(1.0), "{x} {y}");
        }
    }

    #[test]
    fn table_is_certified_and_conservative() {
        let spec = KernelSpec::quadratic(0.0, 6.0, 1.0);
        let nodes: Vec<f64> = (0..=30).map(|i| i as f64 * 0.1).collect();
        let table = heat_kernel_1d(&spec, &nodes, 0.1).unwrap();
        assert!(table.error < 1e-8, "{}", table.error);
        let late = heat_kernel_1d(&spec, &nodes, 40.0).unwrap();
        assert!(late.p.iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn flat_interval_kernel_is_cosine_series() {
        let spec = KernelSpec::flat(0.0, std::f64::consts::PI);
        let k = SpectralKernel::new(&spec, 60);
        let (x, y, t) = (0.4, 2.0, 0.2);
        let series: f64 =
            1.0 + (1..200).map(|n| 2.0 * (-(n * n) as f64 * t).exp() * (n as f64 * x).cos() * (n as f64 * y).cos()).sum::<f64>();
        assert!((k.kernel(x, y, t) - series).abs() < 1e-9);
    }
}
