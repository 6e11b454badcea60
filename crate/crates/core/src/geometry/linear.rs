use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Points live in the plane; a point of a 1-dimensional space is `(x, 0)`.
pub type Point = Vector2<f64>;

pub fn point1(x: f64) -> Point {
    Point::new(x, 0.0)
}

pub fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

/// A linear map of R^dim, dim in {1, 2}. In dimension 1 only the (0,0)
/// entry is nonzero, so the 2x2 arithmetic is shared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Linear {
    dim: usize,
    m: Matrix2<f64>,
}

impl Linear {
    pub fn new(dim: usize, m: Matrix2<f64>) -> Self {
        if dim == 1 {
            Linear { dim, m: Matrix2::new(m[(0, 0)], 0.0, 0.0, 0.0) }
        } else {
            Linear { dim: 2, m }
        }
    }

    pub fn scalar(dim: usize, s: f64) -> Self {
        Linear::new(dim, Matrix2::new(s, 0.0, 0.0, s))
    }

    pub fn identity(dim: usize) -> Self {
        Linear::scalar(dim, 1.0)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        match rows {
            [r] if r.len() == 1 => Ok(Linear::scalar(1, r[0])),
            [r0, r1] if r0.len() == 2 && r1.len() == 2 => {
                Ok(Linear::new(2, Matrix2::new(r0[0], r0[1], r1[0], r1[1])))
            }
            _ => Err(Error::Scene("matrix must be 1x1 or 2x2".into())),
        }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        if self.dim == 1 {
            vec![vec![self.m[(0, 0)]]]
        } else {
            vec![vec![self.m[(0, 0)], self.m[(0, 1)]], vec![self.m[(1, 0)], self.m[(1, 1)]]]
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.m
    }

    pub fn det(&self) -> f64 {
        if self.dim == 1 {
            self.m[(0, 0)]
        } else {
            self.m[(0, 0)] * self.m[(1, 1)] - self.m[(0, 1)] * self.m[(1, 0)]
        }
    }

    /// (smallest, largest) singular value. Closed form; the smallest is
    /// recovered as |det| / largest, which stays accurate near 1.
    pub fn singular_values(&self) -> (f64, f64) {
        if self.dim == 1 {
            let a = self.m[(0, 0)].abs();
            return (a, a);
        }
        let (a, b, c, d) = (self.m[(0, 0)], self.m[(0, 1)], self.m[(1, 0)], self.m[(1, 1)]);
        let t = a * a + b * b + c * c + d * d;
        let det = (a * d - b * c).abs();
        let disc = ((t - 2.0 * det) * (t + 2.0 * det)).max(0.0).sqrt();
        let smax = ((t + disc) / 2.0).sqrt();
        if smax == 0.0 {
            return (0.0, 0.0);
        }
        (det / smax, smax)
    }

    pub fn min_singular(&self) -> f64 {
        self.singular_values().0
    }

    /// Operator norm.
    pub fn norm(&self) -> f64 {
        self.singular_values().1
    }

    pub fn inverse(&self) -> Option<Linear> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        if self.dim == 1 {
            return Some(Linear::scalar(1, 1.0 / det));
        }
        let (a, b, c, d) = (self.m[(0, 0)], self.m[(0, 1)], self.m[(1, 0)], self.m[(1, 1)]);
        Some(Linear::new(2, Matrix2::new(d / det, -b / det, -c / det, a / det)))
    }

    pub fn apply(&self, v: Point) -> Point {
        self.m * v
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &Linear) -> Linear {
        Linear::new(self.dim, self.m * inner.m)
    }
}

/// x ↦ Lx + offset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineMap {
    pub linear: Linear,
    pub offset: Point,
}

impl AffineMap {
    pub fn new(linear: Linear, offset: Point) -> Self {
        let offset = if linear.dim() == 1 { Point::new(offset.x, 0.0) } else { offset };
        AffineMap { linear, offset }
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap::new(Linear::identity(dim), Point::zeros())
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    pub fn apply(&self, x: Point) -> Point {
        self.linear.apply(x) + self.offset
    }

    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap::new(self.linear.compose(&inner.linear), self.apply(inner.offset))
    }

    pub fn inverse(&self) -> Option<AffineMap> {
        let inv = self.linear.inverse()?;
        Some(AffineMap::new(inv, -inv.apply(self.offset)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_match_svd() {
        let cases = [
            Matrix2::new(2.0, 0.0, 0.0, 2.0),
            Matrix2::new(1.0, 2.0, 3.0, 4.0),
            Matrix2::new(1.0, 0.5, 0.0, 2.0),
            Matrix2::new(0.0, -3.0, 1e-3, 0.0),
            Matrix2::new(1.0, 1.0, 1.0, 1.0),
        ];
        for m in cases {
            let l = Linear::new(2, m);
            let sv = m.singular_values();
            let (lo, hi) = (sv.min(), sv.max());
            let (a, b) = l.singular_values();
            assert!((a - lo).abs() < 1e-12 * hi.max(1.0), "{m} {a} {lo}");
            assert!((b - hi).abs() < 1e-12 * hi.max(1.0));
        }
    }

    #[test]
    fn dim_one_behaves_like_scalars() {
        let l = Linear::scalar(1, -3.0);
        assert_eq!(l.det(), -3.0);
        assert_eq!(l.singular_values(), (3.0, 3.0));
        assert_eq!(l.inverse().unwrap().det(), -1.0 / 3.0);
        let f = AffineMap::new(Linear::scalar(1, 2.0), point1(-1.0));
        assert_eq!(f.apply(point1(0.75)), point1(0.5));
        assert_eq!(f.inverse().unwrap().apply(point1(0.5)), point1(0.75));
    }

    #[test]
    fn compose_then_inverse_is_identity() {
        let f = AffineMap::new(Linear::new(2, Matrix2::new(1.0, 2.0, -1.0, 3.0)), Point::new(0.3, -0.2));
        let g = f.compose(&f.inverse().unwrap());
        let p = Point::new(0.7, 0.1);
        assert!((g.apply(p) - p).norm() < 1e-14);
    }
}
