use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linear::Point;
use super::polytope::Polytope;
use super::simplex::Simplex;
use super::space::PhaseSpace;
use crate::error::{Error, Result};

/// Points closer than this to a region boundary are treated as skeleton points.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// The interior of a finite union of closed convex polytopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub polytopes: Vec<Polytope>,
}

impl Region {
    pub fn new(polytopes: Vec<Polytope>) -> Result<Self> {
        let Some(first) = polytopes.first() else { return Err(Error::EmptyRegion) };
        if polytopes.iter().any(|p| p.dim() != first.dim()) {
            return Err(Error::DimensionMismatch { expected: first.dim(), got: 3 - first.dim() });
        }
        Ok(Region { polytopes })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Region::new(vec![Polytope::interval(lo, hi)?])
    }

    pub fn from_simplex(s: &Simplex) -> Self {
        Region { polytopes: vec![s.to_polytope()] }
    }

    pub fn dim(&self) -> usize {
        self.polytopes.first().map_or(0, |p| p.dim())
    }

    /// Ambient (unnormalized) measure; polytopes are assumed interior-disjoint.
    pub fn measure(&self) -> f64 {
        self.polytopes.iter().map(|p| p.measure()).sum()
    }

    pub fn margin(&self, p: Point) -> f64 {
        self.polytopes.iter().map(|q| q.margin(p)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        self.polytopes.iter().any(|q| q.contains(p, tol))
    }

    pub fn distance(&self, p: Point) -> f64 {
        self.polytopes.iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn vertices(&self) -> Vec<Point> {
        self.polytopes.iter().flat_map(|p| p.vertices()).collect()
    }

    pub fn bbox(&self) -> (Point, Point) {
        let mut lo = Point::repeat(f64::INFINITY);
        let mut hi = Point::repeat(f64::NEG_INFINITY);
        for p in &self.polytopes {
            let (a, b) = p.bbox();
            lo = lo.inf(&a);
            hi = hi.sup(&b);
        }
        (lo, hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let total = self.measure();
        let mut pick = rng.random::<f64>() * total;
        for p in &self.polytopes {
            if pick < p.measure() {
                return p.sample(rng);
            }
            pick -= p.measure();
        }
        self.polytopes[self.polytopes.len() - 1].sample(rng)
    }

    /// True if the closed union contains the whole segment a→b.
    pub fn sees(&self, a: Point, b: Point) -> bool {
        let mut spans: Vec<(f64, f64)> =
            self.polytopes.iter().filter_map(|p| p.segment_range(a, b, BOUNDARY_TOL)).collect();
        spans.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut reach = 0.0;
        for (t0, t1) in spans {
            if t0 > reach + 1e-9 {
                return false;
            }
            reach = f64::max(reach, t1);
        }
        reach >= 1.0 - 1e-9
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Interior(usize),
    Boundary,
    Outside,
}

/// A topological partition: regions with interior-disjoint closures covering M.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub space: PhaseSpace,
    pub regions: Vec<Region>,
}

impl Partition {
    pub fn new(space: PhaseSpace, regions: Vec<Region>) -> Result<Self> {
        if regions.is_empty() {
            return Err(Error::EmptyRegion);
        }
        for r in &regions {
            if r.dim() != space.dim() {
                return Err(Error::DimensionMismatch { expected: space.dim(), got: r.dim() });
            }
        }
        Ok(Partition { space, regions })
    }

    pub fn space(&self) -> &PhaseSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn region(&self, i: usize) -> &Region {
        &self.regions[i]
    }

    /// Normalized Lebesgue measure of region i.
    pub fn measure(&self, i: usize) -> f64 {
        self.regions[i].measure() / self.space.volume()
    }

    /// Regions whose closure contains `p` (up to `tol`, modulo lifts on tori).
    pub fn closures_containing(&self, p: Point, tol: f64) -> Vec<usize> {
        let p = self.space.wrap(p);
        let lifts = self.space.lifts();
        (0..self.regions.len())
            .filter(|&i| lifts.iter().any(|k| self.regions[i].contains(p + k, tol)))
            .collect()
    }

    pub fn locate(&self, p: Point) -> Location {
        let p = self.space.wrap(p);
        for (i, r) in self.regions.iter().enumerate() {
            if r.polytopes.iter().any(|q| q.margin(p) > BOUNDARY_TOL) {
                return Location::Interior(i);
            }
        }
        let hits = self.closures_containing(p, BOUNDARY_TOL);
        match hits.as_slice() {
            [] => Location::Outside,
            [i] if self.space.boundary_distance(p) > BOUNDARY_TOL => Location::Interior(*i),
            _ => Location::Boundary,
        }
    }
}

/// Connected components of a 1D region as arcs `(lo, hi)`; on the circle an
/// arc through 0 gets `hi > 1`.
fn arcs(region: &Region, torus: bool) -> Vec<(f64, f64)> {
    let mut iv: Vec<(f64, f64)> = region
        .polytopes
        .iter()
        .map(|p| {
            let (a, b) = p.bbox();
            (a.x, b.x)
        })
        .collect();
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in iv {
        match out.last_mut() {
            Some(last) if lo <= last.1 + BOUNDARY_TOL => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    if torus && out.len() > 1 && out[0].0 <= BOUNDARY_TOL && out[out.len() - 1].1 >= 1.0 - BOUNDARY_TOL {
        let first = out.remove(0);
        let last = out.last_mut().unwrap();
        last.1 = first.1 + 1.0;
    }
    out
}

fn arc_position(arc: (f64, f64), x: f64) -> Option<f64> {
    if x >= arc.0 - BOUNDARY_TOL && x <= arc.1 + BOUNDARY_TOL {
        Some(x)
    } else if x + 1.0 <= arc.1 + BOUNDARY_TOL && x + 1.0 >= arc.0 {
        Some(x + 1.0)
    } else {
        None
    }
}

/// Geodesic distances inside a 2D region between the given points, routed
/// through polytope vertices (exact for polygonal domains).
fn geodesic_sup(region: &Region, pts: &[Point]) -> f64 {
    let verts = region.vertices();
    let nv = verts.len();
    let mut dv = vec![vec![f64::INFINITY; nv]; nv];
    for i in 0..nv {
        dv[i][i] = 0.0;
        for j in i + 1..nv {
            if region.sees(verts[i], verts[j]) {
                let d = (verts[i] - verts[j]).norm();
                dv[i][j] = d;
                dv[j][i] = d;
            }
        }
    }
    for k in 0..nv {
        for i in 0..nv {
            for j in 0..nv {
                let via = dv[i][k] + dv[k][j];
                if via < dv[i][j] {
                    dv[i][j] = via;
                }
            }
        }
    }
    // sight[a][v] = |a - v| if visible
    let sight: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| verts.iter().map(|v| if region.sees(*a, *v) { (a - v).norm() } else { f64::INFINITY }).collect())
        .collect();
    let mut best: f64 = 0.0;
    for a in 0..pts.len() {
        let to_vertex: Vec<f64> = (0..nv)
            .map(|v| (0..nv).map(|u| sight[a][u] + dv[u][v]).fold(f64::INFINITY, f64::min))
            .collect();
        for b in a + 1..pts.len() {
            let d = if region.sees(pts[a], pts[b]) {
                (pts[a] - pts[b]).norm()
            } else {
                (0..nv).map(|v| to_vertex[v] + sight[b][v]).fold(f64::INFINITY, f64::min)
            };
            best = best.max(d);
        }
    }
    best
}

pub fn geodesic_distance(region: &Region, a: Point, b: Point) -> f64 {
    if region.dim() == 1 || region.sees(a, b) {
        return (a - b).norm();
    }
    geodesic_sup(region, &[a, b])
}

/// Supremum over `samples` random pairs of the shortest-path distance inside
/// the closure of `region`. Disconnected regions give infinity.
pub fn inner_diameter(region: &Region, space: &PhaseSpace, samples: usize, seed: u64) -> Result<f64> {
    if region.polytopes.is_empty() || !(region.measure() > 0.0) {
        return Err(Error::EmptyRegion);
    }
    if samples < 2 {
        return Err(Error::BadParameter("inner diameter needs at least 2 samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Point> = (0..samples).map(|_| region.sample(&mut rng)).collect();
    if region.dim() == 1 {
        let arcs = arcs(region, space.is_torus());
        if arcs.len() > 1 {
            return Ok(f64::INFINITY);
        }
        let pos: Vec<f64> = pts.iter().filter_map(|p| arc_position(arcs[0], p.x)).collect();
        let lo = pos.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pos.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        return Ok(hi - lo);
    }
    if region.polytopes.len() == 1 {
        let mut best: f64 = 0.0;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.max((pts[i] - pts[j]).norm());
            }
        }
        return Ok(best);
    }
    Ok(geodesic_sup(region, &pts))
}

/// Upper estimate of the inner diameter of the closure, used for K1.
/// Returns the value and whether it is exact.
pub fn closure_inner_diameter(region: &Region, space: &PhaseSpace) -> Result<(f64, bool)> {
    if region.polytopes.is_empty() || !(region.measure() > 0.0) {
        return Err(Error::EmptyRegion);
    }
    if region.dim() == 1 {
        let arcs = arcs(region, space.is_torus());
        return Ok(if arcs.len() > 1 { (f64::INFINITY, true) } else { (arcs[0].1 - arcs[0].0, true) });
    }
    if region.polytopes.len() == 1 {
        return Ok((region.polytopes[0].diameter(), true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d1a);
    let mut pts = region.vertices();
    pts.extend((0..128).map(|_| region.sample(&mut rng)));
    Ok((geodesic_sup(region, &pts), false))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x: f64, y: f64) -> Polytope {
        Polytope::polygon(vec![
            Point::new(x, y),
            Point::new(x + 1.0, y),
            Point::new(x + 1.0, y + 1.0),
            Point::new(x, y + 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn locate_doubling_partition() {
        let space = PhaseSpace::torus(1).unwrap();
        let p = Partition::new(space, vec![Region::interval(0.0, 0.5).unwrap(), Region::interval(0.5, 1.0).unwrap()])
            .unwrap();
        assert_eq!(p.locate(Point::new(0.3, 0.0)), Location::Interior(0));
        assert_eq!(p.locate(Point::new(0.7, 0.0)), Location::Interior(1));
        assert_eq!(p.locate(Point::new(0.5, 0.0)), Location::Boundary);
        assert_eq!(p.locate(Point::new(0.0, 0.0)), Location::Boundary);
        assert_eq!(p.locate(Point::new(1.0 - 1e-14, 0.0)), Location::Boundary);
        assert_eq!(p.locate(Point::new(0.5 + 1e-11, 0.0)), Location::Interior(1));
    }

    #[test]
    fn locate_triangle_boundary() {
        let space = PhaseSpace::standard_triangle();
        let p = Partition::new(space.clone(), vec![Region::from_simplex(&space.simplices()[0])]).unwrap();
        assert_eq!(p.locate(Point::new(0.2, 0.2)), Location::Interior(0));
        assert_eq!(p.locate(Point::new(0.2, 0.0)), Location::Boundary);
        assert_eq!(p.locate(Point::new(0.8, 0.8)), Location::Outside);
    }

    #[test]
    fn wrapped_arc_diameter() {
        let space = PhaseSpace::torus(1).unwrap();
        let arc = Region::new(vec![Polytope::interval(0.75, 1.0).unwrap(), Polytope::interval(0.0, 0.25).unwrap()])
            .unwrap();
        let d = inner_diameter(&arc, &space, 4000, 1).unwrap();
        assert!((d - 0.5).abs() < 1e-3, "{d}");
        assert_eq!(closure_inner_diameter(&arc, &space).unwrap(), (0.5, true));
        let split = Region::new(vec![Polytope::interval(0.1, 0.2).unwrap(), Polytope::interval(0.5, 0.6).unwrap()])
            .unwrap();
        assert!(inner_diameter(&split, &space, 10, 1).unwrap().is_infinite());
    }

    #[test]
    fn l_shape_geodesic() {
        let space = PhaseSpace::torus(2).unwrap();
        let l = Region::new(vec![square(0.0, 0.0), square(1.0, 0.0), square(0.0, 1.0)]).unwrap();
        let (a, b) = (Point::new(1.9, 0.9), Point::new(0.9, 1.9));
        // shortest path bends at the reflex corner (1,1)
        let oracle = 2.0 * (a - Point::new(1.0, 1.0)).norm();
        assert!((geodesic_distance(&l, a, b) - oracle).abs() < 1e-12);
        assert!(oracle > (a - b).norm());
        let d = inner_diameter(&l, &space, 300, 2).unwrap();
        let d_more = inner_diameter(&l, &space, 600, 2).unwrap();
        assert!(d_more >= d);
        let (closure, exact) = closure_inner_diameter(&l, &space).unwrap();
        assert!(!exact);
        assert!((closure - 8f64.sqrt()).abs() < 1e-12);
        assert!(d <= closure);
    }

    #[test]
    fn convex_diameter_from_samples() {
        let space = PhaseSpace::torus(2).unwrap();
        let r = Region::new(vec![square(0.0, 0.0)]).unwrap();
        let d = inner_diameter(&r, &space, 2000, 4).unwrap();
        assert!(d <= 2f64.sqrt() && d > 2f64.sqrt() - 0.15);
        assert_eq!(
            inner_diameter(&Region { polytopes: vec![] }, &space, 4, 0).unwrap_err().code(),
            "empty-region"
        );
    }
}
