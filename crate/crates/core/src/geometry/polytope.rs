use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::linear::{cross, AffineMap, Point};
use crate::error::{Error, Result};

/// Convex polygon with counter-clockwise vertices and cached unit edge normals
/// (pointing inward), so margins cost one dot product per edge.
#[derive(Clone, Debug)]
pub struct Polygon {
    vertices: Vec<Point>,
    normals: Vec<Point>,
    offsets: Vec<f64>,
}

impl PartialEq for Polygon {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices
    }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>() / 2.0
}

impl Polygon {
    /// Builds a polygon from a convex vertex loop in either orientation.
    /// Repeated and collinear vertices are dropped.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self> {
        vertices.dedup_by(|a, b| (*a - *b).norm() < 1e-15);
        while vertices.len() > 1 && (vertices[0] - vertices[vertices.len() - 1]).norm() < 1e-15 {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::EmptyRegion);
        }
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        let mut kept = Vec::with_capacity(vertices.len());
        let n = vertices.len();
        for i in 0..n {
            let e1 = vertices[i] - vertices[(i + n - 1) % n];
            let e2 = vertices[(i + 1) % n] - vertices[i];
            // sine of the turning angle
            let turn = cross(e1, e2) / (e1.norm() * e2.norm());
            if turn < -1e-9 {
                return Err(Error::Scene("polygon is not convex".into()));
            }
            if turn > 1e-12 {
                kept.push(vertices[i]);
            }
        }
        if kept.len() < 3 || signed_area(&kept) <= 0.0 {
            return Err(Error::EmptyRegion);
        }
        Ok(Self::from_ccw(kept))
    }

    fn from_ccw(vertices: Vec<Point>) -> Self {
        let n = vertices.len();
        let mut normals = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        for i in 0..n {
            let e = vertices[(i + 1) % n] - vertices[i];
            let nrm = Point::new(-e.y, e.x) / e.norm();
            offsets.push(nrm.dot(&vertices[i]));
            normals.push(nrm);
        }
        Polygon { vertices, normals, offsets }
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Smallest signed distance to an edge line; positive strictly inside.
    pub fn margin(&self, p: Point) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(n, o)| n.dot(&p) - o)
            .fold(f64::INFINITY, f64::min)
    }

    fn clip(&self, n: Point, o: f64) -> Vec<Point> {
        // keep n·p >= o
        let v = &self.vertices;
        let mut out = Vec::with_capacity(v.len() + 1);
        for i in 0..v.len() {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            let da = n.dot(&a) - o;
            let db = n.dot(&b) - o;
            if da >= 0.0 {
                out.push(a);
            }
            if (da >= 0.0) != (db >= 0.0) {
                let t = da / (da - db);
                out.push(a + (b - a) * t);
            }
        }
        out
    }

    pub fn intersect(&self, other: &Polygon) -> Option<Polygon> {
        let mut cur = self.clone();
        for (n, o) in other.normals.iter().zip(&other.offsets) {
            let verts = cur.clip(*n, *o);
            cur = Polygon::new(verts).ok()?;
        }
        Some(cur)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Polytope {
    Interval { lo: f64, hi: f64 },
    Polygon(Polygon),
}

impl Polytope {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::EmptyRegion);
        }
        Ok(Polytope::Interval { lo, hi })
    }

    pub fn polygon(vertices: Vec<Point>) -> Result<Self> {
        Ok(Polytope::Polygon(Polygon::new(vertices)?))
    }

    /// Builds a polytope of the given dimension from vertices (convex hull in 1D).
    pub fn from_points(dim: usize, points: Vec<Point>) -> Result<Self> {
        if dim == 1 {
            let lo = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
            Polytope::interval(lo, hi)
        } else {
            Polytope::polygon(points)
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Polytope::Interval { .. } => 1,
            Polytope::Polygon(_) => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match self {
            Polytope::Interval { lo, hi } => hi - lo,
            Polytope::Polygon(p) => p.area(),
        }
    }

    pub fn vertices(&self) -> Vec<Point> {
        match self {
            Polytope::Interval { lo, hi } => vec![Point::new(*lo, 0.0), Point::new(*hi, 0.0)],
            Polytope::Polygon(p) => p.vertices().to_vec(),
        }
    }

    pub fn margin(&self, p: Point) -> f64 {
        match self {
            Polytope::Interval { lo, hi } => (p.x - lo).min(hi - p.x),
            Polytope::Polygon(poly) => poly.margin(p),
        }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.margin(p) >= -tol
    }

    /// Euclidean distance from `p` to the closed polytope.
    pub fn distance(&self, p: Point) -> f64 {
        match self {
            Polytope::Interval { lo, hi } => (lo - p.x).max(p.x - hi).max(0.0),
            Polytope::Polygon(poly) => {
                if poly.margin(p) >= 0.0 {
                    return 0.0;
                }
                let v = poly.vertices();
                (0..v.len())
                    .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn centroid(&self) -> Point {
        match self {
            Polytope::Interval { lo, hi } => Point::new((lo + hi) / 2.0, 0.0),
            Polytope::Polygon(p) => {
                let v = p.vertices();
                let mut c = Point::zeros();
                let mut a = 0.0;
                for i in 1..v.len() - 1 {
                    let t = cross(v[i] - v[0], v[i + 1] - v[0]) / 2.0;
                    c += (v[0] + v[i] + v[i + 1]) * (t / 3.0);
                    a += t;
                }
                c / a
            }
        }
    }

    pub fn bbox(&self) -> (Point, Point) {
        let v = self.vertices();
        let mut lo = v[0];
        let mut hi = v[0];
        for p in &v[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        (lo, hi)
    }

    /// Largest vertex-to-vertex distance: the diameter of a convex set.
    pub fn diameter(&self) -> f64 {
        let v = self.vertices();
        let mut d: f64 = 0.0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                d = d.max((v[i] - v[j]).norm());
            }
        }
        d
    }

    pub fn translate(&self, t: Point) -> Polytope {
        match self {
            Polytope::Interval { lo, hi } => Polytope::Interval { lo: lo + t.x, hi: hi + t.x },
            Polytope::Polygon(p) => {
                Polytope::Polygon(Polygon::from_ccw(p.vertices().iter().map(|v| v + t).collect()))
            }
        }
    }

    /// Image under an injective affine map; `None` if the map collapses it.
    pub fn image(&self, f: &AffineMap) -> Option<Polytope> {
        let pts: Vec<Point> = self.vertices().into_iter().map(|v| f.apply(v)).collect();
        Polytope::from_points(self.dim(), pts).ok()
    }

    pub fn intersect(&self, other: &Polytope) -> Option<Polytope> {
        match (self, other) {
            (Polytope::Interval { lo: a, hi: b }, Polytope::Interval { lo: c, hi: d }) => {
                Polytope::interval(a.max(*c), b.min(*d)).ok()
            }
            (Polytope::Polygon(p), Polytope::Polygon(q)) => p.intersect(q).map(Polytope::Polygon),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Polytope::Interval { lo, hi } => Point::new(lo + (hi - lo) * rng.random::<f64>(), 0.0),
            Polytope::Polygon(p) => {
                let v = p.vertices();
                let total = p.area();
                let mut pick = rng.random::<f64>() * total;
                let mut k = 1;
                while k < v.len() - 2 {
                    let t = cross(v[k] - v[0], v[k + 1] - v[0]) / 2.0;
                    if pick < t {
                        break;
                    }
                    pick -= t;
                    k += 1;
                }
                sample_triangle(rng, v[0], v[k], v[k + 1])
            }
        }
    }

    /// Parameter range `[t0, t1]` of the segment a→b lying in the closed polytope.
    pub fn segment_range(&self, a: Point, b: Point, tol: f64) -> Option<(f64, f64)> {
        match self {
            Polytope::Interval { lo, hi } => {
                let d = b.x - a.x;
                if d.abs() < 1e-300 {
                    return if a.x >= lo - tol && a.x <= hi + tol { Some((0.0, 1.0)) } else { None };
                }
                let (t0, t1) = ((lo - tol - a.x) / d, (hi + tol - a.x) / d);
                let (t0, t1) = (t0.min(t1).max(0.0), t0.max(t1).min(1.0));
                (t0 <= t1).then_some((t0, t1))
            }
            Polytope::Polygon(poly) => {
                let (mut t0, mut t1) = (0.0f64, 1.0f64);
                for (n, o) in poly.normals.iter().zip(&poly.offsets) {
                    let fa = n.dot(&a) - o + tol;
                    let fb = n.dot(&b) - o + tol;
                    if fa < 0.0 && fb < 0.0 {
                        return None;
                    }
                    if fa < 0.0 {
                        t0 = t0.max(fa / (fa - fb));
                    } else if fb < 0.0 {
                        t1 = t1.min(fa / (fa - fb));
                    }
                }
                (t0 <= t1).then_some((t0, t1))
            }
        }
    }

    pub fn to_coords(&self) -> Vec<Vec<f64>> {
        match self {
            Polytope::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
            Polytope::Polygon(p) => p.vertices().iter().map(|v| vec![v.x, v.y]).collect(),
        }
    }

    pub fn from_coords(coords: &[Vec<f64>]) -> Result<Self> {
        let dim = coords.first().map(|c| c.len()).unwrap_or(0);
        if !(1..=2).contains(&dim) || coords.iter().any(|c| c.len() != dim) {
            return Err(Error::Scene("vertices must all have 1 or 2 coordinates".into()));
        }
        let pts = coords.iter().map(|c| Point::new(c[0], if dim == 2 { c[1] } else { 0.0 })).collect();
        Polytope::from_points(dim, pts)
    }
}

pub fn sample_triangle<R: Rng + ?Sized>(rng: &mut R, a: Point, b: Point, c: Point) -> Point {
    let mut u: f64 = rng.random();
    let mut v: f64 = rng.random();
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    a + (b - a) * u + (c - a) * v
}

pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 { ((p - a).dot(&ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + ab * t)).norm()
}

impl Serialize for Polytope {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<Vec<f64>>::deserialize(d)?;
        Polytope::from_coords(&coords).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tri() -> Polytope {
        Polytope::polygon(vec![Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 0.0)]).unwrap()
    }

    #[test]
    fn orientation_is_normalized() {
        let t = tri();
        assert!((t.measure() - 0.5).abs() < 1e-15);
        assert!(t.margin(Point::new(0.2, 0.2)) > 0.0);
        assert!(t.margin(Point::new(0.8, 0.8)) < 0.0);
    }

    #[test]
    fn non_convex_rejected() {
        let pts = vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(1.0, 0.2),
            Point::new(1.0, 2.0),
        ];
        assert!(Polytope::polygon(pts).is_err());
    }

    #[test]
    fn clipping_two_squares() {
        let sq = |x: f64, y: f64| {
            Polytope::polygon(vec![
                Point::new(x, y),
                Point::new(x + 1.0, y),
                Point::new(x + 1.0, y + 1.0),
                Point::new(x, y + 1.0),
            ])
            .unwrap()
        };
        let i = sq(0.0, 0.0).intersect(&sq(0.5, 0.5)).unwrap();
        assert!((i.measure() - 0.25).abs() < 1e-15);
        assert!(sq(0.0, 0.0).intersect(&sq(1.0, 0.0)).is_none());
    }

    #[test]
    fn samples_land_inside() {
        let t = tri();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut left = 0;
        for _ in 0..20_000 {
            let p = t.sample(&mut rng);
            assert!(t.contains(p, 1e-15));
            if p.x < 0.5 {
                left += 1;
            }
        }
        // area of {x < 1/2} in the triangle is 3/8 of 1/2
        assert!((left as f64 / 20_000.0 - 0.75).abs() < 4.0 / 20_000f64.sqrt());
    }

    #[test]
    fn distance_to_triangle() {
        assert_eq!(tri().distance(Point::new(0.1, 0.1)), 0.0);
        assert!((tri().distance(Point::new(-1.0, 0.5)) - 1.0).abs() < 1e-15);
        assert!((tri().distance(Point::new(1.0, 1.0)) - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip() {
        let t = tri();
        let s = serde_json::to_string(&t).unwrap();
        let back: Polytope = serde_json::from_str(&s).unwrap();
        assert_eq!(t, back);
        let i: Polytope = serde_json::from_str("[[0.25],[0.5]]").unwrap();
        assert_eq!(i, Polytope::Interval { lo: 0.25, hi: 0.5 });
    }
}
