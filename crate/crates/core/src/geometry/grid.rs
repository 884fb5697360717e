//! Tabulated metric charts.
//!
//! File format: a header line `dim nx ny x0 x1 y0 y1`, then `nx·ny` rows of
//! `g11 g12 g22` in row-major order (x fastest). For `dim = 1` the header
//! still carries seven fields (`ny = 1`, `y0 = y1 = 0`) and each row may hold
//! either `g11` alone or all three entries, of which only `g11` is read.
//!
//! Between nodes the metric is a tensor-product natural cubic spline, so it
//! is C² and curvature computed by finite differences is continuous.

use crate::linalg::{Mat2, Vec2};

use super::GeometryError;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricGrid {
    pub dim: usize,
    pub nx: usize,
    pub ny: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// `[g11, g12, g22]` planes, row-major with x fastest.
    planes: [Vec<f64>; 3],
    /// Second x-derivatives of each row spline, same layout as `planes`.
    row_curv: [Vec<f64>; 3],
}

impl MetricGrid {
    pub fn parse(text: &str) -> Result<Self, GeometryError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| GeometryError::Grid("empty grid file".into()))?;
        let h: Vec<f64> = parse_numbers(header)?;
        if h.len() != 7 {
            return Err(GeometryError::Grid(format!("header needs 7 fields `dim nx ny x0 x1 y0 y1`, found {}", h.len())));
        }
        let dim = h[0] as usize;
        let nx = h[1] as usize;
        let ny = h[2] as usize;
        if !(dim == 1 || dim == 2) {
            return Err(GeometryError::Grid(format!("dim must be 1 or 2, got {dim}")));
        }
        if nx < 4 || (dim == 2 && ny < 4) || (dim == 1 && ny != 1) {
            return Err(GeometryError::Grid(format!("grid too small: nx={nx} ny={ny} (need ≥ 4 nodes per axis, ny = 1 in 1-D)")));
        }
        if !(h[4] > h[3]) || (dim == 2 && !(h[6] > h[5])) {
            return Err(GeometryError::Grid("grid ranges must be increasing".into()));
        }
        let mut planes = [Vec::new(), Vec::new(), Vec::new()];
        for (row_no, line) in lines.enumerate() {
            let v = parse_numbers(line)?;
            match (dim, v.len()) {
                (1, 1) | (1, 3) => {
                    planes[0].push(v[0]);
                    planes[1].push(0.0);
                    planes[2].push(1.0);
                }
                (2, 3) => {
                    for c in 0..3 {
                        planes[c].push(v[c]);
                    }
                }
                _ => {
                    return Err(GeometryError::Grid(format!(
                        "row {}: expected {} values, found {}",
                        row_no + 1,
                        if dim == 1 { "1 or 3" } else { "3" },
                        v.len()
                    )))
                }
            }
        }
        if planes[0].len() != nx * ny {
            return Err(GeometryError::Grid(format!("expected {} metric rows, found {}", nx * ny, planes[0].len())));
        }
        for k in 0..nx * ny {
            let g = [[planes[0][k], planes[1][k]], [planes[1][k], planes[2][k]]];
            if !crate::linalg::is_spd(&g, dim) {
                return Err(GeometryError::Grid(format!("metric row {} is not positive definite", k + 1)));
            }
        }
        Ok(Self::from_planes(dim, nx, ny, (h[3], h[4]), (h[5], h[6]), planes))
    }

    pub fn from_planes(dim: usize, nx: usize, ny: usize, x_range: (f64, f64), y_range: (f64, f64), planes: [Vec<f64>; 3]) -> Self {
        let dx = (x_range.1 - x_range.0) / (nx - 1) as f64;
        let mut row_curv = [vec![0.0; nx * ny], vec![0.0; nx * ny], vec![0.0; nx * ny]];
        for c in 0..3 {
            for j in 0..ny {
                let row = &planes[c][j * nx..(j + 1) * nx];
                let m = natural_spline_curvature(row, dx);
                row_curv[c][j * nx..(j + 1) * nx].copy_from_slice(&m);
            }
        }
        Self { dim, nx, ny, x_range, y_range, planes, row_curv }
    }

    /// Writes the grid back in the documented text format.
    pub fn to_text(&self) -> String {
        let mut s =
            format!("{} {} {} {} {} {} {}\n", self.dim, self.nx, self.ny, self.x_range.0, self.x_range.1, self.y_range.0, self.y_range.1);
        for k in 0..self.nx * self.ny {
            s.push_str(&format!("{} {} {}\n", self.planes[0][k], self.planes[1][k], self.planes[2][k]));
        }
        s
    }

    pub fn metric(&self, x: &Vec2) -> Mat2 {
        let mut out = [0.0; 3];
        let dx = (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64;
        for (c, slot) in out.iter_mut().enumerate() {
            if self.dim == 1 {
                *slot = spline_eval(&self.planes[c], &self.row_curv[c], self.x_range.0, dx, x[0]);
                continue;
            }
            let mut column = Vec::with_capacity(self.ny);
            for j in 0..self.ny {
                let r = j * self.nx..(j + 1) * self.nx;
                column.push(spline_eval(&self.planes[c][r.clone()], &self.row_curv[c][r], self.x_range.0, dx, x[0]));
            }
            let dy = (self.y_range.1 - self.y_range.0) / (self.ny - 1) as f64;
            let curv = natural_spline_curvature(&column, dy);
            *slot = spline_eval(&column, &curv, self.y_range.0, dy, x[1]);
        }
        if self.dim == 1 {
            [[out[0], 0.0], [0.0, 1.0]]
        } else {
            [[out[0], out[1]], [out[1], out[2]]]
        }
    }

    /// Node coordinates (for graph distances).
    pub fn node(&self, i: usize, j: usize) -> Vec2 {
        let dx = (self.x_range.1 - self.x_range.0) / (self.nx - 1) as f64;
        let dy = if self.ny > 1 { (self.y_range.1 - self.y_range.0) / (self.ny - 1) as f64 } else { 0.0 };
        [self.x_range.0 + i as f64 * dx, self.y_range.0 + j as f64 * dy]
    }
}

fn parse_numbers(line: &str) -> Result<Vec<f64>, GeometryError> {
    line.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| GeometryError::Grid(format!("not a number: `{t}`")))).collect()
}

/// Second derivatives of the natural cubic spline through uniformly spaced values.
fn natural_spline_curvature(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // Thomas algorithm on the interior system h/6 m_{i-1} + 2h/3 m_i + h/6 m_{i+1} = rhs_i.
    let k = n - 2;
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    for i in 0..k {
        let rhs = (y[i + 2] - 2.0 * y[i + 1] + y[i]) / h;
        let b = 2.0 * h / 3.0;
        let a = h / 6.0;
        if i == 0 {
            c[i] = a / b;
            d[i] = rhs / b;
        } else {
            let denom = b - a * c[i - 1];
            c[i] = a / denom;
            d[i] = (rhs - a * d[i - 1]) / denom;
        }
    }
    for i in (0..k).rev() {
        m[i + 1] = if i + 1 == k { d[i] } else { d[i] - c[i] * m[i + 2] };
    }
    m
}

fn spline_eval(y: &[f64], m: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = y.len();
    let u = (x - x0) / h;
    let last = (n - 1) as f64;
    // Linear extrapolation outside the node range keeps the chart total.
    if u < 0.0 {
        let slope = (y[1] - y[0]) / h - h * (2.0 * m[0] + m[1]) / 6.0;
        return y[0] + slope * (x - x0);
    }
    if u > last {
        let slope = (y[n - 1] - y[n - 2]) / h + h * (m[n - 2] + 2.0 * m[n - 1]) / 6.0;
        return y[n - 1] + slope * (x - (x0 + last * h));
    }
    let i = (u.floor() as usize).min(n - 2);
    let t = u - i as f64;
    let a = 1.0 - t;
    a * y[i] + t * y[i + 1] + ((a * a * a - a) * m[i] + (t * t * t - t) * m[i + 1]) * h * h / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_text(dim: usize, n: usize) -> String {
        let ny = if dim == 1 { 1 } else { n };
        let mut s = format!("{dim} {n} {ny} 0 1 {} {}\n", 0, if dim == 1 { 0 } else { 1 });
        for _ in 0..n * ny {
            s.push_str("1 0 1\n");
        }
        s
    }

    #[test]
    fn parses_and_interpolates_flat_grid() {
        let g = MetricGrid::parse(&flat_text(2, 6)).unwrap();
        let m = g.metric(&[0.37, 0.81]);
        assert!((m[0][0] - 1.0).abs() < 1e-14 && m[0][1].abs() < 1e-14 && (m[1][1] - 1.0).abs() < 1e-14);
        let back = MetricGrid::parse(&g.to_text()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn spline_reproduces_smooth_metric() {
        let n = 41;
        let mut s = format!("2 {n} {n} 0 1 0 1\n");
        for j in 0..n {
            for i in 0..n {
                let (x, y) = (i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64);
                let l = 1.0 + 0.3 * (x * y).sin();
                s.push_str(&format!("{} 0 {}\n", l, l));
            }
        }
        let g = MetricGrid::parse(&s).unwrap();
        let m = g.metric(&[0.413, 0.577]);
        let exact = 1.0 + 0.3 * (0.413f64 * 0.577).sin();
        assert!((m[0][0] - exact).abs() < 1e-6);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(MetricGrid::parse("2 4 4 0 1 0 1\n1 0 1\n").is_err());
        assert!(MetricGrid::parse("3 4 4 0 1 0 1\n").is_err());
        let mut s = String::from("1 4 1 0 1 0 0\n");
        for _ in 0..4 {
            s.push_str("-1\n");
        }
        assert!(MetricGrid::parse(&s).is_err());
    }
}
