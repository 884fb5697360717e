//! Riemannian distances: closed forms for the built-ins, a graph
//! approximation for tabulated charts.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::linalg::{self, Vec2};

use super::manifold::ManifoldSpec;

/// Great-circle distance between unit-sphere points, scaled by `radius`.
pub fn great_circle(radius: f64, a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let s = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    radius * s.atan2(dot)
}

/// Shortest path in the flat annulus `r_in ≤ |x|`: the chord when it clears
/// the hole, otherwise tangent segments joined by an arc of the inner circle.
pub fn annulus(r_in: f64, x: &Vec2, y: &Vec2) -> f64 {
    let chord = (x[0] - y[0]).hypot(x[1] - y[1]);
    if chord == 0.0 {
        return 0.0;
    }
    // Closest point of the segment to the origin.
    let d = linalg::sub(y, x);
    let t = (-(x[0] * d[0] + x[1] * d[1]) / (chord * chord)).clamp(0.0, 1.0);
    let c = linalg::add(x, &linalg::scale(&d, t));
    if c[0].hypot(c[1]) >= r_in {
        return chord;
    }
    let rx = x[0].hypot(x[1]).max(r_in);
    let ry = y[0].hypot(y[1]).max(r_in);
    let angle = (x[0] * y[1] - x[1] * y[0]).abs().atan2(x[0] * y[0] + x[1] * y[1]);
    let wrap = angle - (r_in / rx).acos() - (r_in / ry).acos();
    (rx * rx - r_in * r_in).sqrt() + (ry * ry - r_in * r_in).sqrt() + r_in * wrap.max(0.0)
}

#[derive(PartialEq)]
struct Node(f64, usize);

impl Eq for Node {}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Grid resolution per axis used by [`graph_distance`].
pub const GRAPH_NODES: usize = 161;

/// Dijkstra over a regular grid of the chart box restricted to `M`, with a
/// 16-neighbour stencil and edge lengths from the metric at edge midpoints.
pub fn graph_distance(m: &ManifoldSpec, x: &Vec2, y: &Vec2) -> f64 {
    let dim = m.dim();
    let dom = m.domain();
    if dim == 1 {
        // 1-D: integrate sqrt(g) along the segment.
        let n = 2000;
        let (a, b) = (x[0].min(y[0]), x[0].max(y[0]));
        let step = (b - a) / n as f64;
        return (0..n)
            .map(|k| {
                let p = [a + (k as f64 + 0.5) * step, 0.0];
                m.metric(&p)[0][0].sqrt() * step
            })
            .sum();
    }
    let n = GRAPH_NODES;
    let coord = |i: usize, j: usize| -> Vec2 {
        [dom.lo[0] + (dom.hi[0] - dom.lo[0]) * i as f64 / (n - 1) as f64, dom.lo[1] + (dom.hi[1] - dom.lo[1]) * j as f64 / (n - 1) as f64]
    };
    let inside: Vec<bool> = (0..n * n).map(|k| m.contains(&coord(k % n, k / n))).collect();
    let nearest = |p: &Vec2| -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, &ok) in inside.iter().enumerate() {
            if ok {
                let q = coord(k % n, k / n);
                let d = (q[0] - p[0]).hypot(q[1] - p[1]);
                if d < best.0 {
                    best = (d, k);
                }
            }
        }
        best.1
    };
    let edge = |p: &Vec2, q: &Vec2| -> f64 {
        let mid = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        linalg::norm_g(&m.metric(&mid), &linalg::sub(q, p), 2)
    };
    let (s, t) = (nearest(x), nearest(y));
    let mut dist = vec![f64::INFINITY; n * n];
    let mut heap = BinaryHeap::new();
    dist[s] = 0.0;
    heap.push(Node(0.0, s));
    let moves: Vec<(i64, i64)> = (-2i64..=2)
        .flat_map(|a| (-2i64..=2).map(move |b| (a, b)))
        .filter(|&(a, b)| (a, b) != (0, 0) && num_gcd(a.abs(), b.abs()) == 1)
        .collect();
    while let Some(Node(d, k)) = heap.pop() {
        if k == t {
            break;
        }
        if d > dist[k] {
            continue;
        }
        let (i, j) = ((k % n) as i64, (k / n) as i64);
        let p = coord(i as usize, j as usize);
        for &(a, b) in &moves {
            let (ni, nj) = (i + a, j + b);
            if ni < 0 || nj < 0 || ni >= n as i64 || nj >= n as i64 {
                continue;
            }
            let nk = nj as usize * n + ni as usize;
            if !inside[nk] {
                continue;
            }
            let nd = d + edge(&p, &coord(ni as usize, nj as usize));
            if nd < dist[nk] {
                dist[nk] = nd;
                heap.push(Node(nd, nk));
            }
        }
    }
    let ps = coord(s % n, s / n);
    let pt = coord(t % n, t / n);
    edge(x, &ps) + dist[t] + edge(&pt, y)
}

fn num_gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        num_gcd(b, a % b)
    }
}
