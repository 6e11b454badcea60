use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::Point;
use super::polytope::{sample_triangle, segment_distance, Polytope};
use super::simplex::Simplex;
use crate::error::{Error, Result};

/// Flat model spaces. Lebesgue measure is normalized by `volume()`.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSpace {
    Torus { dim: usize },
    Complex { simplices: Vec<Simplex>, volume: f64, boundary: Vec<(Point, Point)> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpaceSpec {
    Torus { dim: usize },
    SimplexComplex { dim: usize, simplices: Vec<Simplex> },
}

impl Serialize for PhaseSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhaseSpace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = SpaceSpec::deserialize(d)?;
        PhaseSpace::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

/// Checks dimension, pairwise interior disjointness, face compatibility and,
/// when given, that the simplices fill `expected_volume`.
pub fn validate_triangulation(simplices: &[Simplex], expected_volume: Option<f64>) -> Result<()> {
    let bad = |m: String| Err(Error::BadTriangulation(m));
    let Some(first) = simplices.first() else { return bad("no simplices".into()) };
    let dim = first.dim();
    if simplices.iter().any(|s| s.dim() != dim) {
        return bad("simplices of mixed dimension".into());
    }
    let polys: Vec<Polytope> = simplices.iter().map(|s| s.to_polytope()).collect();
    for i in 0..simplices.len() {
        for j in i + 1..simplices.len() {
            if let Some(x) = polys[i].intersect(&polys[j]) {
                if x.measure() > 1e-12 {
                    return bad(format!("simplices {i} and {j} overlap"));
                }
            }
            for (a, b) in [(i, j), (j, i)] {
                for v in simplices[a].vertices() {
                    let on_b = polys[b].contains(*v, 1e-12);
                    let is_vertex = simplices[b].vertices().iter().any(|w| (w - v).norm() < 1e-12);
                    if on_b && !is_vertex {
                        return bad(format!("vertex of simplex {a} lies inside a face of simplex {b}"));
                    }
                }
            }
        }
    }
    if let Some(vol) = expected_volume {
        let total: f64 = simplices.iter().map(|s| s.volume()).sum();
        if (total - vol).abs() > 1e-9 * vol {
            return bad(format!("simplices cover volume {total}, expected {vol}"));
        }
    }
    Ok(())
}

fn boundary_facets(simplices: &[Simplex]) -> Vec<(Point, Point)> {
    let same = |a: Point, b: Point| (a - b).norm() < 1e-12;
    let mut facets: Vec<(Point, Point)> = Vec::new();
    for s in simplices {
        let v = s.vertices();
        if s.dim() == 1 {
            facets.push((v[0], v[0]));
            facets.push((v[1], v[1]));
        } else {
            for k in 0..3 {
                facets.push((v[k], v[(k + 1) % 3]));
            }
        }
    }
    let matches = |f: &(Point, Point), g: &(Point, Point)| {
        (same(f.0, g.0) && same(f.1, g.1)) || (same(f.0, g.1) && same(f.1, g.0))
    };
    facets
        .iter()
        .enumerate()
        .filter(|(i, f)| !facets.iter().enumerate().any(|(j, g)| j != *i && matches(f, g)))
        .map(|(_, f)| *f)
        .collect()
}

impl PhaseSpace {
    pub fn torus(dim: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::BadParameter(format!("torus dimension {dim} not supported")));
        }
        Ok(PhaseSpace::Torus { dim })
    }

    pub fn complex(simplices: Vec<Simplex>) -> Result<Self> {
        validate_triangulation(&simplices, None)?;
        let volume = simplices.iter().map(|s| s.volume()).sum();
        let boundary = boundary_facets(&simplices);
        Ok(PhaseSpace::Complex { simplices, volume, boundary })
    }

    pub fn standard_triangle() -> Self {
        PhaseSpace::complex(vec![Simplex::standard(2)]).expect("standard triangle")
    }

    pub fn spec(&self) -> SpaceSpec {
        match self {
            PhaseSpace::Torus { dim } => SpaceSpec::Torus { dim: *dim },
            PhaseSpace::Complex { simplices, .. } => {
                SpaceSpec::SimplexComplex { dim: self.dim(), simplices: simplices.clone() }
            }
        }
    }

    pub fn from_spec(spec: &SpaceSpec) -> Result<Self> {
        match spec {
            SpaceSpec::Torus { dim } => PhaseSpace::torus(*dim),
            SpaceSpec::SimplexComplex { dim, simplices } => {
                if simplices.iter().any(|s| s.dim() != *dim) {
                    return Err(Error::DimensionMismatch { expected: *dim, got: simplices[0].dim() });
                }
                PhaseSpace::complex(simplices.clone())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PhaseSpace::Torus { dim } => *dim,
            PhaseSpace::Complex { simplices, .. } => simplices[0].dim(),
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self, PhaseSpace::Torus { .. })
    }

    pub fn name(&self) -> String {
        match self {
            PhaseSpace::Torus { dim } => format!("torus{dim}"),
            PhaseSpace::Complex { simplices, .. } => format!("complex{}-n{}", self.dim(), simplices.len()),
        }
    }

    /// Ambient volume of the fundamental domain.
    pub fn volume(&self) -> f64 {
        match self {
            PhaseSpace::Torus { .. } => 1.0,
            PhaseSpace::Complex { volume, .. } => *volume,
        }
    }

    /// Simplices tiling the space (for tori, a triangulation of the unit cube).
    pub fn simplices(&self) -> Vec<Simplex> {
        match self {
            PhaseSpace::Torus { dim: 1 } => vec![Simplex::standard(1)],
            PhaseSpace::Torus { .. } => vec![
                Simplex::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0)]).unwrap(),
                Simplex::new(vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)]).unwrap(),
            ],
            PhaseSpace::Complex { simplices, .. } => simplices.clone(),
        }
    }

    /// Reduce to the fundamental domain [0,1)^m on tori.
    pub fn wrap(&self, p: Point) -> Point {
        match self {
            PhaseSpace::Torus { dim } => {
                let w = |x: f64| {
                    let r = x.rem_euclid(1.0);
                    if r >= 1.0 {
                        0.0
                    } else {
                        r
                    }
                };
                Point::new(w(p.x), if *dim == 2 { w(p.y) } else { 0.0 })
            }
            _ => p,
        }
    }

    /// Shortest displacement from `a` to `b` (minimal image on tori).
    pub fn displacement(&self, a: Point, b: Point) -> Point {
        let d = b - a;
        match self {
            PhaseSpace::Torus { .. } => Point::new(d.x - d.x.round(), d.y - d.y.round()),
            _ => d,
        }
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        self.displacement(a, b).norm()
    }

    pub fn diameter(&self) -> f64 {
        match self {
            PhaseSpace::Torus { dim } => (*dim as f64).sqrt() / 2.0,
            PhaseSpace::Complex { simplices, .. } => {
                let v: Vec<Point> = simplices.iter().flat_map(|s| s.vertices().to_vec()).collect();
                let mut d: f64 = 0.0;
                for a in &v {
                    for b in &v {
                        d = d.max((a - b).norm());
                    }
                }
                d
            }
        }
    }

    /// Integer translates that identify points on tori.
    pub fn lifts(&self) -> Vec<Point> {
        match self {
            PhaseSpace::Torus { dim: 1 } => vec![Point::zeros(), Point::new(-1.0, 0.0), Point::new(1.0, 0.0)],
            PhaseSpace::Torus { .. } => {
                let mut v = vec![Point::zeros()];
                for i in -1..=1 {
                    for j in -1..=1 {
                        if (i, j) != (0, 0) {
                            v.push(Point::new(i as f64, j as f64));
                        }
                    }
                }
                v
            }
            _ => vec![Point::zeros()],
        }
    }

    /// Lattice translates k with (box + k) meeting the fundamental domain.
    pub fn translates_meeting(&self, lo: Point, hi: Point) -> Vec<Point> {
        match self {
            PhaseSpace::Torus { dim } => {
                let range = |c: usize| {
                    let a = (-hi[c] - 1e-12).ceil() as i64;
                    let b = (1.0 - lo[c] + 1e-12).floor() as i64;
                    a..=b
                };
                let ys: Vec<i64> = if *dim == 2 { range(1).collect() } else { vec![0] };
                let mut out = Vec::new();
                for kx in range(0) {
                    for &ky in &ys {
                        out.push(Point::new(kx as f64, ky as f64));
                    }
                }
                out
            }
            _ => vec![Point::zeros()],
        }
    }

    pub fn bbox(&self) -> (Point, Point) {
        match self {
            PhaseSpace::Torus { dim } => {
                (Point::zeros(), Point::new(1.0, if *dim == 2 { 1.0 } else { 0.0 }))
            }
            PhaseSpace::Complex { simplices, .. } => {
                let mut lo = Point::repeat(f64::INFINITY);
                let mut hi = Point::repeat(f64::NEG_INFINITY);
                for v in simplices.iter().flat_map(|s| s.vertices()) {
                    lo = lo.inf(v);
                    hi = hi.sup(v);
                }
                (lo, hi)
            }
        }
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        match self {
            PhaseSpace::Torus { .. } => true,
            PhaseSpace::Complex { simplices, .. } => {
                simplices.iter().any(|s| s.to_polytope().contains(p, tol))
            }
        }
    }

    /// Distance to the topological boundary of M (infinite on tori).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        match self {
            PhaseSpace::Torus { .. } => f64::INFINITY,
            PhaseSpace::Complex { boundary, .. } => boundary
                .iter()
                .map(|(a, b)| segment_distance(p, *a, *b))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            PhaseSpace::Torus { dim } => {
                let x = rng.random::<f64>();
                let y = if *dim == 2 { rng.random::<f64>() } else { 0.0 };
                Point::new(x, y)
            }
            PhaseSpace::Complex { simplices, volume, .. } => {
                let mut pick = rng.random::<f64>() * volume;
                let mut s = &simplices[simplices.len() - 1];
                for t in simplices {
                    if pick < t.volume() {
                        s = t;
                        break;
                    }
                    pick -= t.volume();
                }
                let v = s.vertices();
                if s.dim() == 1 {
                    v[0] + (v[1] - v[0]) * rng.random::<f64>()
                } else {
                    sample_triangle(rng, v[0], v[1], v[2])
                }
            }
        }
    }
}
