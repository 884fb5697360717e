//! Finite-difference stencils over chart coordinates.
//!
//! Central differences by default; second-order one-sided stencils when the
//! central stencil would come within `4h` of a non-periodic chart-box edge.

use crate::linalg::{Mat2, Vec2};

use super::manifold::{ChartBox, Christoffel};

/// Values that finite differences can combine linearly.
pub trait Lin: Copy {
    fn zero() -> Self;
    fn axpy(self, a: f64, other: Self) -> Self;
}

impl Lin for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn axpy(self, a: f64, other: Self) -> Self {
        self + a * other
    }
}

impl Lin for Vec2 {
    #[inline]
    fn zero() -> Self {
        [0.0; 2]
    }
    #[inline]
    fn axpy(self, a: f64, o: Self) -> Self {
        [self[0] + a * o[0], self[1] + a * o[1]]
    }
}

impl Lin for Mat2 {
    #[inline]
    fn zero() -> Self {
        [[0.0; 2]; 2]
    }
    #[inline]
    fn axpy(self, a: f64, o: Self) -> Self {
        [self[0].axpy(a, o[0]), self[1].axpy(a, o[1])]
    }
}

impl Lin for Christoffel {
    #[inline]
    fn zero() -> Self {
        [[[0.0; 2]; 2]; 2]
    }
    #[inline]
    fn axpy(self, a: f64, o: Self) -> Self {
        [self[0].axpy(a, o[0]), self[1].axpy(a, o[1])]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    Central,
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub h: f64,
    pub domain: ChartBox,
}

impl Stencil {
    fn side(&self, x: &Vec2, i: usize) -> Side {
        let d = &self.domain;
        if d.periodic[i] {
            return Side::Central;
        }
        let reach = 4.0 * self.h;
        if x[i] - reach < d.lo[i] {
            Side::Forward
        } else if x[i] + reach > d.hi[i] {
            Side::Backward
        } else {
            Side::Central
        }
    }

    /// True when any axis needs a one-sided stencil at `x`.
    pub fn clipped(&self, x: &Vec2, dim: usize) -> bool {
        (0..dim).any(|i| self.side(x, i) != Side::Central)
    }

    #[inline]
    fn shift(x: &Vec2, i: usize, s: f64) -> Vec2 {
        let mut y = *x;
        y[i] += s;
        y
    }

    /// `∂_i f(x)`.
    pub fn d1<T: Lin>(&self, f: &impl Fn(&Vec2) -> T, x: &Vec2, i: usize) -> T {
        let h = self.h;
        match self.side(x, i) {
            Side::Central => T::zero().axpy(0.5 / h, f(&Self::shift(x, i, h))).axpy(-0.5 / h, f(&Self::shift(x, i, -h))),
            Side::Forward => {
                T::zero().axpy(-1.5 / h, f(x)).axpy(2.0 / h, f(&Self::shift(x, i, h))).axpy(-0.5 / h, f(&Self::shift(x, i, 2.0 * h)))
            }
            Side::Backward => {
                T::zero().axpy(1.5 / h, f(x)).axpy(-2.0 / h, f(&Self::shift(x, i, -h))).axpy(0.5 / h, f(&Self::shift(x, i, -2.0 * h)))
            }
        }
    }

    /// `∂_i ∂_j f(x)`.
    pub fn d2<T: Lin>(&self, f: &impl Fn(&Vec2) -> T, x: &Vec2, i: usize, j: usize) -> T {
        if i != j {
            return self.d1(&|y: &Vec2| self.d1(f, y, j), x, i);
        }
        let h2 = self.h * self.h;
        let h = self.h;
        match self.side(x, i) {
            Side::Central => {
                T::zero().axpy(1.0 / h2, f(&Self::shift(x, i, h))).axpy(-2.0 / h2, f(x)).axpy(1.0 / h2, f(&Self::shift(x, i, -h)))
            }
            Side::Forward | Side::Backward => {
                let s = if self.side(x, i) == Side::Forward { h } else { -h };
                T::zero()
                    .axpy(2.0 / h2, f(x))
                    .axpy(-5.0 / h2, f(&Self::shift(x, i, s)))
                    .axpy(4.0 / h2, f(&Self::shift(x, i, 2.0 * s)))
                    .axpy(-1.0 / h2, f(&Self::shift(x, i, 3.0 * s)))
            }
        }
    }

    /// All first partials, `[∂_0 f, ∂_1 f]` (slot 1 zero in 1-D).
    pub fn partials<T: Lin>(&self, f: &impl Fn(&Vec2) -> T, x: &Vec2, dim: usize) -> [T; 2] {
        let mut out = [T::zero(); 2];
        for (i, slot) in out.iter_mut().enumerate().take(dim) {
            *slot = self.d1(f, x, i);
        }
        out
    }
}
