use nalgebra::Matrix2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::linear::{cross, AffineMap, Linear, Point};
use super::polytope::Polytope;
use crate::error::{Error, Result};

const MIN_VOLUME: f64 = 1e-14;

/// An embedded m-simplex (m = 1 or 2) with ordered vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct Simplex {
    vertices: Vec<Point>,
}

impl Simplex {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if !(2..=3).contains(&vertices.len()) {
            return Err(Error::BadParameter(format!("simplex needs 2 or 3 vertices, got {}", vertices.len())));
        }
        let dim = vertices.len() - 1;
        let vertices: Vec<Point> =
            if dim == 1 { vertices.into_iter().map(|v| Point::new(v.x, 0.0)).collect() } else { vertices };
        let s = Simplex { vertices };
        let vol = s.volume();
        if !(vol > MIN_VOLUME) {
            return Err(Error::DegenerateSimplex { volume: vol });
        }
        Ok(s)
    }

    /// Standard simplex: [0,1] or the triangle (0,0), (1,0), (0,1).
    pub fn standard(dim: usize) -> Self {
        let v = if dim == 1 {
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]
        } else {
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)]
        };
        Simplex { vertices: v }
    }

    pub fn dim(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn signed_volume(&self) -> f64 {
        let v = &self.vertices;
        if self.dim() == 1 {
            v[1].x - v[0].x
        } else {
            cross(v[1] - v[0], v[2] - v[0]) / 2.0
        }
    }

    pub fn volume(&self) -> f64 {
        self.signed_volume().abs()
    }

    pub fn orientation(&self) -> i8 {
        if self.signed_volume() > 0.0 {
            1
        } else {
            -1
        }
    }

    pub fn barycenter(&self) -> Point {
        self.vertices.iter().sum::<Point>() / self.vertices.len() as f64
    }

    pub fn to_polytope(&self) -> Polytope {
        Polytope::from_points(self.dim(), self.vertices.clone()).expect("nondegenerate simplex")
    }

    /// Edge matrix with columns v_i - v_0.
    fn frame(&self) -> Linear {
        let v = &self.vertices;
        if self.dim() == 1 {
            Linear::scalar(1, v[1].x - v[0].x)
        } else {
            let (a, b) = (v[1] - v[0], v[2] - v[0]);
            Linear::new(2, Matrix2::new(a.x, b.x, a.y, b.y))
        }
    }
}

impl Serialize for Simplex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dim();
        let coords: Vec<Vec<f64>> =
            self.vertices.iter().map(|v| if d == 1 { vec![v.x] } else { vec![v.x, v.y] }).collect();
        coords.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Simplex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<Vec<f64>>::deserialize(d)?;
        let pts = coords.iter().map(|c| Point::new(c[0], c.get(1).copied().unwrap_or(0.0))).collect();
        Simplex::new(pts).map_err(serde::de::Error::custom)
    }
}

/// Lexicographic permutations of 0..n.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// The (m+1)! pieces of the barycentric subdivision. For the permutation
/// p, piece vertex i is the barycenter of p_0..p_i.
pub fn barycentric_subdivision(s: &Simplex) -> Result<Vec<Simplex>> {
    let vol = s.volume();
    if !(vol > MIN_VOLUME) {
        return Err(Error::DegenerateSimplex { volume: vol });
    }
    let m = s.dim();
    permutations(m + 1)
        .into_iter()
        .map(|perm| {
            let verts = (0..=m)
                .map(|i| perm[..=i].iter().map(|&j| s.vertices[j]).sum::<Point>() / (i + 1) as f64)
                .collect();
            Simplex::new(verts)
        })
        .collect()
}

/// The affine map sending vertex i of `sub` to vertex i of `whole`.
pub fn affine_onto(sub: &Simplex, whole: &Simplex) -> Result<AffineMap> {
    if sub.dim() != whole.dim() {
        return Err(Error::DimensionMismatch { expected: whole.dim(), got: sub.dim() });
    }
    let inv = sub.frame().inverse().ok_or(Error::DegenerateSimplex { volume: sub.volume() })?;
    let lin = whole.frame().compose(&inv);
    let offset = whole.vertices[0] - lin.apply(sub.vertices[0]);
    Ok(AffineMap::new(lin, offset))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_subdivision() {
        let pieces = barycentric_subdivision(&Simplex::standard(1)).unwrap();
        assert_eq!(pieces.len(), 2);
        assert_eq!(pieces[0].vertices(), &[Point::new(0.0, 0.0), Point::new(0.5, 0.0)]);
        assert_eq!(pieces[1].vertices(), &[Point::new(1.0, 0.0), Point::new(0.5, 0.0)]);
    }

    #[test]
    fn triangle_subdivision_areas() {
        let s = Simplex::standard(2);
        let pieces = barycentric_subdivision(&s).unwrap();
        assert_eq!(pieces.len(), 6);
        let total: f64 = pieces.iter().map(|p| p.volume()).sum();
        assert!((total - s.volume()).abs() < 1e-12);
        for p in &pieces {
            assert!((p.volume() - s.volume() / 6.0).abs() < 1e-15);
            assert!(s.vertices().contains(&p.vertices()[0]));
            assert_eq!(p.vertices()[2], s.barycenter());
        }
        let twice: usize = pieces.iter().map(|p| barycentric_subdivision(p).unwrap().len()).sum();
        assert_eq!(twice, 36);
    }

    #[test]
    fn degenerate_rejected() {
        let e = Simplex::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(2.0, 2.0)]);
        assert_eq!(e.unwrap_err().code(), "degenerate-simplex");
    }

    #[test]
    fn affine_onto_examples() {
        let half = Simplex::new(vec![Point::new(0.0, 0.0), Point::new(0.5, 0.0)]).unwrap();
        let f = affine_onto(&half, &Simplex::standard(1)).unwrap();
        assert_eq!(f.linear.det(), 2.0);
        assert_eq!(f.offset.x, 0.0);
        let id = affine_onto(&Simplex::standard(2), &Simplex::standard(2)).unwrap();
        assert_eq!(id, AffineMap::identity(2));
        let e = affine_onto(&half, &Simplex::standard(2)).unwrap_err();
        assert_eq!(e.code(), "dimension-mismatch");
    }
}
