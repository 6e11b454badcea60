//! Exact rational arithmetic for the builders. Every f64 is a dyadic
//! rational, so barycenters and chart maps of subdivisions can be computed
//! without rounding and rounded once at the end.

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use super::linear::{AffineMap, Linear, Point};
use nalgebra::Matrix2;

pub type Q = BigRational;

fn q(x: f64) -> Q {
    BigRational::from_float(x).expect("finite coordinate")
}

fn f(x: &Q) -> f64 {
    x.to_f64().expect("representable")
}

#[derive(Clone, Debug, PartialEq)]
pub struct QPoint {
    pub x: Q,
    pub y: Q,
}

impl QPoint {
    pub fn from_point(p: Point) -> Self {
        QPoint { x: q(p.x), y: q(p.y) }
    }

    pub fn to_point(&self) -> Point {
        Point::new(f(&self.x), f(&self.y))
    }

    /// (1-t)·self + t·other.
    pub fn lerp(&self, other: &QPoint, t: &Q) -> QPoint {
        let s = Q::one() - t;
        QPoint { x: &s * &self.x + t * &other.x, y: &s * &self.y + t * &other.y }
    }
}

pub fn barycenter(pts: &[QPoint]) -> QPoint {
    let n = Q::from_integer(pts.len().into());
    let (mut x, mut y) = (Q::zero(), Q::zero());
    for p in pts {
        x += &p.x;
        y += &p.y;
    }
    QPoint { x: x / &n, y: y / n }
}

pub fn qvalue(x: f64) -> Q {
    q(x)
}

/// x ↦ m·x + b with rational entries; in dimension 1 only m[0][0] and b.x matter.
#[derive(Clone, Debug)]
pub struct QAffine {
    pub dim: usize,
    pub m: [[Q; 2]; 2],
    pub b: QPoint,
}

impl QAffine {
    pub fn apply(&self, p: &QPoint) -> QPoint {
        let x = &self.m[0][0] * &p.x + &self.m[0][1] * &p.y + &self.b.x;
        let y = &self.m[1][0] * &p.x + &self.m[1][1] * &p.y + &self.b.y;
        QPoint { x, y }
    }

    pub fn det(&self) -> Q {
        if self.dim == 1 {
            self.m[0][0].clone()
        } else {
            &self.m[0][0] * &self.m[1][1] - &self.m[0][1] * &self.m[1][0]
        }
    }

    pub fn inverse(&self) -> Option<QAffine> {
        let d = self.det();
        if d.is_zero() {
            return None;
        }
        let m = if self.dim == 1 {
            [[Q::one() / &d, Q::zero()], [Q::zero(), Q::zero()]]
        } else {
            [
                [&self.m[1][1] / &d, -&self.m[0][1] / &d],
                [-&self.m[1][0] / &d, &self.m[0][0] / &d],
            ]
        };
        let lin = QAffine { dim: self.dim, m, b: QPoint { x: Q::zero(), y: Q::zero() } };
        let nb = lin.apply(&self.b);
        Some(QAffine { b: QPoint { x: -nb.x, y: -nb.y }, ..lin })
    }

    /// Entries rounded to nearest f64.
    pub fn to_affine(&self) -> AffineMap {
        let m = Matrix2::new(f(&self.m[0][0]), f(&self.m[0][1]), f(&self.m[1][0]), f(&self.m[1][1]));
        AffineMap::new(Linear::new(self.dim, m), self.b.to_point())
    }
}

/// The affine map sending sub[i] to whole[i].
pub fn affine_onto_exact(dim: usize, sub: &[QPoint], whole: &[QPoint]) -> Option<QAffine> {
    let frame = |v: &[QPoint]| -> QAffine {
        let z = Q::zero();
        let m = if dim == 1 {
            [[&v[1].x - &v[0].x, z.clone()], [z.clone(), z]]
        } else {
            [[&v[1].x - &v[0].x, &v[2].x - &v[0].x], [&v[1].y - &v[0].y, &v[2].y - &v[0].y]]
        };
        QAffine { dim, m, b: QPoint { x: Q::zero(), y: Q::zero() } }
    };
    let s_inv = frame(sub).inverse()?;
    let w = frame(whole);
    let mut m: [[Q; 2]; 2] = Default::default();
    for (i, row) in m.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = &w.m[i][0] * &s_inv.m[0][j] + &w.m[i][1] * &s_inv.m[1][j];
        }
    }
    let lin = QAffine { dim, m, b: QPoint { x: Q::zero(), y: Q::zero() } };
    let img = lin.apply(&sub[0]);
    let b = QPoint { x: &whole[0].x - img.x, y: &whole[0].y - img.y };
    Some(QAffine { b, ..lin })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thirds_stay_exact() {
        let s: Vec<QPoint> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)].iter().map(|&(x, y)| QPoint::from_point(Point::new(x, y))).collect();
        let c = barycenter(&s);
        let m = barycenter(&s[..2]);
        let sub = vec![s[0].clone(), m, c];
        let a = affine_onto_exact(2, &sub, &s).unwrap();
        assert_eq!(num_traits::Signed::abs(&a.det()), Q::from_integer(6.into()));
        assert_eq!(a.to_affine().linear.det().abs(), 6.0);
        let back = a.inverse().unwrap();
        assert_eq!(back.apply(&s[2]), sub[2]);
    }
}
