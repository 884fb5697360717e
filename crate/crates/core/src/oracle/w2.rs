//! Quadratic Wasserstein distance on a line by quantile coupling.

use super::OracleError;

pub const NORMALIZATION_TOL: f64 = 1e-8;
pub const QUANTILE_NODES: usize = 10_000;

/// Piecewise-linear density on uniform nodes of `[a, b]`.
#[derive(Debug, Clone)]
pub struct Density1d {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
}

impl Density1d {
    pub fn from_fn(a: f64, b: f64, cells: usize, f: impl Fn(f64) -> f64) -> Self {
        let dx = (b - a) / cells as f64;
        Self { a, b, values: (0..=cells).map(|i| f(a + i as f64 * dx)).collect() }
    }

    pub fn dx(&self) -> f64 {
        (self.b - self.a) / (self.values.len() - 1) as f64
    }

    pub fn total(&self) -> f64 {
        let dx = self.dx();
        self.values.windows(2).map(|w| 0.5 * (w[0] + w[1]) * dx).sum()
    }

    pub fn normalized(mut self) -> Self {
        let z = self.total();
        for v in &mut self.values {
            *v /= z;
        }
        self
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.values.len() < 2 || self.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(OracleError::InvalidGrid("density must be nonnegative on at least two nodes".into()));
        }
        let z = self.total();
        if (z - 1.0).abs() > NORMALIZATION_TOL {
            return Err(OracleError::NotNormalized(z));
        }
        Ok(())
    }

    /// Quantiles at the sorted levels `qs`, inverting the piecewise-quadratic CDF.
    fn quantiles(&self, qs: &[f64]) -> Vec<f64> {
        let dx = self.dx();
        let z = self.total();
        let mut out = Vec::with_capacity(qs.len());
        let mut cell = 0;
        let mut cdf = 0.0;
        let last = self.values.len() - 2;
        for &q in qs {
            let target = q * z;
            loop {
                let mass = 0.5 * (self.values[cell] + self.values[cell + 1]) * dx;
                if cdf + mass >= target || cell == last {
                    break;
                }
                cdf += mass;
                cell += 1;
            }
            let (d0, d1) = (self.values[cell], self.values[cell + 1]);
            let need = (target - cdf).max(0.0);
            // d0 s + (d1 − d0) s² / (2 dx) = need
            let a = 0.5 * (d1 - d0) / dx;
            let s = if a.abs() < 1e-14 * (d0 + d1).max(1e-300) / dx {
                if d0 > 0.0 {
                    need / d0
                } else {
                    0.0
                }
            } else {
                let disc = (d0 * d0 + 4.0 * a * need).max(0.0);
                2.0 * need / (d0 + disc.sqrt())
            };
            out.push(self.a + cell as f64 * dx + s.clamp(0.0, dx));
        }
        out
    }
}

/// `W₂` between two densities, by midpoint quadrature of
/// `∫₀¹ (F_a⁻¹ − F_b⁻¹)² dq` on `QUANTILE_NODES` levels.
pub fn w2_1d(a: &Density1d, b: &Density1d) -> Result<f64, OracleError> {
    w2_1d_with(a, b, QUANTILE_NODES)
}

pub fn w2_1d_with(a: &Density1d, b: &Density1d, levels: usize) -> Result<f64, OracleError> {
    a.validate()?;
    b.validate()?;
    let qs: Vec<f64> = (0..levels).map(|i| (i as f64 + 0.5) / levels as f64).collect();
    let qa = a.quantiles(&qs);
    let qb = b.quantiles(&qs);
    let s: f64 = qa.iter().zip(&qb).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / levels as f64).sqrt())
}
