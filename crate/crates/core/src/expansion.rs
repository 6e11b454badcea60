//! Orbits along symbol streams, itineraries, log-expansion sums and
//! hyperbolic times.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Location, Point};
use crate::symbolic::{ItinerarySource, SymbolStream, Word};
use crate::systems::MapFamily;

/// Window sums within this distance of the bound count as ties (hyperbolic).
pub const TIE_TOL: f64 = 1e-9;

/// Steps an orbit point by point. Each step adds a uniform perturbation of
/// amplitude `family.dither` seeded from the start point: without it, binary
/// floating point collapses orbits of maps like 2x mod 1 onto 0 within ~50
/// steps. Expanding maps shadow such pseudo-orbits, and the seeding keeps
/// every orbit reproducible.
pub struct Walker<'a> {
    fam: &'a MapFamily,
    y: Point,
    rng: Option<ChaCha8Rng>,
}

fn dither_seed(p: Point) -> u64 {
    p.x.to_bits() ^ p.y.to_bits().rotate_left(31) ^ 0x9e37_79b9_7f4a_7c15
}

impl<'a> Walker<'a> {
    pub fn new(fam: &'a MapFamily, start: Point) -> Self {
        let rng = (fam.dither > 0.0).then(|| ChaCha8Rng::seed_from_u64(dither_seed(start)));
        Walker { fam, y: fam.space().wrap(start), rng }
    }

    pub fn point(&self) -> Point {
        self.y
    }

    pub fn locate(&self) -> Location {
        self.fam.locate(self.y)
    }

    /// Apply generator `i`; `loc` must be the location of the current point.
    pub fn step(&mut self, i: usize, loc: Location) {
        let exact = self.fam.apply_located(i, self.y, loc);
        self.y = match &mut self.rng {
            None => exact,
            Some(rng) => {
                let amp = self.fam.dither;
                let mut d = Point::new(amp * (2.0 * rng.random::<f64>() - 1.0), 0.0);
                if self.fam.dim() == 2 {
                    d.y = amp * (2.0 * rng.random::<f64>() - 1.0);
                }
                let space = self.fam.space();
                let moved = space.wrap(exact + d);
                if space.is_torus() || space.contains(moved, 0.0) {
                    moved
                } else {
                    exact
                }
            }
        };
    }
}

/// A realized orbital branch.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitRecord {
    pub start: Point,
    pub symbols: Word,
    /// y_0 = x, ..., y_n.
    pub points: Vec<Point>,
    /// a_j = log ‖Df_{ω_j}(y_j)^{-1}‖.
    pub a: Vec<f64>,
    /// Region containing y_j.
    pub regions: Vec<usize>,
    pub itinerary_mode: bool,
    /// Step at which the orbit met the skeleton, if it did.
    pub truncated_at: Option<usize>,
}

impl OrbitRecord {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

/// Like `iterate`, but a skeleton hit truncates the record instead of failing.
pub fn iterate_partial(fam: &MapFamily, x: Point, s: &SymbolStream, n: usize) -> Result<OrbitRecord> {
    let loc0 = fam.locate(x);
    if !matches!(loc0, Location::Interior(_)) {
        return Err(Error::BoundaryStart);
    }
    let itinerary_mode = s.is_itinerary();
    let mut reader = if itinerary_mode { None } else { Some(s.reader(n)?) };
    let mut w = Walker::new(fam, x);
    let mut points = Vec::with_capacity(n + 1);
    let mut symbols = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut regions = Vec::with_capacity(n);
    let mut truncated_at = None;
    points.push(w.point());
    for j in 0..n {
        let y = w.point();
        let loc = if j == 0 { loc0 } else { w.locate() };
        let Location::Interior(region) = loc else {
            truncated_at = Some(j);
            break;
        };
        let sym = match &mut reader {
            None => region,
            Some(r) => r.next_symbol(),
        };
        if sym >= fam.len() {
            return Err(Error::SymbolOutOfRange { symbol: sym, alphabet: fam.len() });
        }
        a.push(-fam.jacobian_located(sym, y, loc).min_singular().ln());
        symbols.push(sym);
        regions.push(region);
        w.step(sym, loc);
        points.push(w.point());
    }
    Ok(OrbitRecord {
        start: x,
        symbols: Word::new(symbols, fam.len())?,
        points,
        a,
        regions,
        itinerary_mode,
        truncated_at,
    })
}

/// Orbit of `x` under f_ω for the first `n` symbols of `s`. Itinerary streams
/// are read off the orbit itself, so the stream's start should be `x`.
pub fn iterate(fam: &MapFamily, x: Point, s: &SymbolStream, n: usize) -> Result<OrbitRecord> {
    let rec = iterate_partial(fam, x, s, n)?;
    match rec.truncated_at {
        Some(step) => Err(Error::BoundaryHit { step }),
        None => Ok(rec),
    }
}

/// The n-itinerary: the region of each orbit point, which also selects the map.
pub fn itinerary(fam: &MapFamily, x: Point, n: usize) -> Result<Word> {
    let mut w = Walker::new(fam, x);
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let loc = w.locate();
        let Location::Interior(l) = loc else {
            return Err(if j == 0 { Error::BoundaryStart } else { Error::BoundaryHit { step: j } });
        };
        out.push(l);
        w.step(l, loc);
    }
    Word::new(out, fam.len())
}

impl ItinerarySource for MapFamily {
    fn alphabet(&self) -> usize {
        self.len()
    }

    fn itinerary(&self, start: Point, n: usize) -> Result<Word> {
        itinerary(self, start, n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperbolicTimeSet {
    pub c: f64,
    pub times: Vec<usize>,
    pub horizon: usize,
}

/// n is hyperbolic iff Σ_{j=n-k}^{n-1} a_j ≤ -ck for all 1 ≤ k ≤ n. With
/// P_t = Σ_{j<t} (a_j + c) this says P_n ≤ min_{m<n} P_m, so one forward
/// scan with a running minimum suffices. Prefix sums are compensated.
pub fn pliss_times(a: &[f64], c: f64) -> HyperbolicTimeSet {
    let mut times = Vec::new();
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut min_prefix = 0.0f64;
    for (i, &x) in a.iter().enumerate() {
        let term = x + c;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        let p = sum + comp;
        if p <= min_prefix + TIE_TOL {
            times.push(i + 1);
        }
        min_prefix = min_prefix.min(p);
    }
    HyperbolicTimeSet { c, times, horizon: a.len() }
}

/// The literal double loop over (n, k); the reference for `pliss_times`.
pub fn pliss_times_bruteforce(a: &[f64], c: f64) -> HyperbolicTimeSet {
    let mut times = Vec::new();
    for n in 1..=a.len() {
        let mut ok = true;
        let mut s = 0.0;
        for k in 1..=n {
            s += a[n - k];
            if s + c * k as f64 > TIE_TOL {
                ok = false;
                break;
            }
        }
        if ok {
            times.push(n);
        }
    }
    HyperbolicTimeSet { c, times, horizon: a.len() }
}

/// |{h ∈ H : h ≤ n}| / n.
pub fn hyperbolic_frequency(h: &HyperbolicTimeSet, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    h.times.iter().take_while(|&&t| t <= n).count() as f64 / n as f64
}

/// Lower bound θ = (c/2)/(A - c/2) on the density of hyperbolic times at
/// level c/2 for sequences with average ≤ -c and terms ≥ -A.
pub fn pliss_bound(c: f64, a_max: f64) -> f64 {
    (c / 2.0) / (a_max - c / 2.0)
}

/// Fraction of steps spent in the expanding regions 0..p.
pub fn expanding_fraction(rec: &OrbitRecord, p: usize) -> f64 {
    if rec.regions.is_empty() {
        return 0.0;
    }
    rec.regions.iter().filter(|&&r| r < p).count() as f64 / rec.regions.len() as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct NueReport {
    pub c: f64,
    pub horizon: usize,
    /// (n, S_n / n) at n = 10, 100, ... and the horizon.
    pub ladder: Vec<(usize, f64)>,
    pub average: f64,
    pub pass: bool,
    /// Level used for hyperbolic times alongside this NUE level.
    pub hyperbolic_level: f64,
    pub hyperbolic_frequency: f64,
}

pub fn check_orbital_nue(rec: &OrbitRecord, c: f64) -> NueReport {
    let n = rec.len();
    let mut ladder = Vec::new();
    let mut sum = 0.0;
    let mut next = 10;
    for (i, a) in rec.a.iter().enumerate() {
        sum += a;
        if i + 1 == next || i + 1 == n {
            ladder.push((i + 1, sum / (i + 1) as f64));
            if i + 1 == next {
                next *= 10;
            }
        }
    }
    let average = if n == 0 { 0.0 } else { sum / n as f64 };
    let h = pliss_times(&rec.a, c / 2.0);
    NueReport {
        c,
        horizon: n,
        ladder,
        average,
        pass: n > 0 && average <= -c,
        hyperbolic_level: c / 2.0,
        hyperbolic_frequency: hyperbolic_frequency(&h, n.max(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point1;
    use crate::systems::{doubling, rational_rotations};
    use std::f64::consts::LN_2;
    use std::sync::Arc;

    #[test]
    fn pliss_examples() {
        assert_eq!(pliss_times(&[-1.0; 4], 1.0).times, vec![1, 2, 3, 4]);
        assert_eq!(pliss_times(&[-1.0, 2.0, -1.0, -1.0], 0.5).times, vec![1]);
        assert_eq!(pliss_times_bruteforce(&[-1.0, 2.0, -1.0, -1.0], 0.5).times, vec![1]);
        assert!(pliss_times(&[], 1.0).times.is_empty());
        assert_eq!(pliss_times_bruteforce(&[-3.0], 1.0).times, vec![1]);
        let h = pliss_times(&[-1.0, 2.0, -1.0, -1.0], 0.5);
        assert_eq!(hyperbolic_frequency(&h, 4), 0.25);
        assert_eq!(hyperbolic_frequency(&pliss_times(&[-1.0; 100], 1.0), 100), 1.0);
    }

    #[test]
    fn doubling_orbit_of_one_third() {
        let f = doubling();
        let rec = iterate(&f, point1(1.0 / 3.0), &SymbolStream::itinerary(Arc::new(f.clone()), point1(1.0 / 3.0)), 4)
            .unwrap();
        let expect = [1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0];
        for (p, e) in rec.points.iter().zip(expect) {
            assert!((p.x - e).abs() < 1e-12);
        }
        assert!(rec.a.iter().all(|&a| (a + LN_2).abs() < 1e-15));
        assert_eq!(rec.symbols.symbols(), &[0, 1, 0, 1]);
    }

    #[test]
    fn itinerary_examples() {
        let f = doubling();
        assert_eq!(itinerary(&f, point1(0.3), 3).unwrap().symbols(), &[0, 1, 0]);
        assert_eq!(itinerary(&f, point1(0.25), 3).unwrap_err(), Error::BoundaryHit { step: 1 });
        let rec = iterate(&f, point1(0.3), &SymbolStream::iid(1, 2).unwrap(), 0).unwrap();
        assert_eq!(rec.points.len(), 1);
        assert_eq!(iterate(&f, point1(0.5), &SymbolStream::iid(1, 2).unwrap(), 3).unwrap_err().code(), "boundary-start");
    }

    #[test]
    fn dither_keeps_doubling_alive() {
        let f = doubling();
        let w = itinerary(&f, point1(0.1234), 5000).unwrap();
        let ones = w.symbols().iter().filter(|&&s| s == 1).count();
        assert!((ones as f64 / 5000.0 - 0.5).abs() < 0.05);
    }

    #[test]
    fn nue_doubling_and_rotation() {
        let f = doubling();
        let rec = iterate(&f, point1(0.1), &SymbolStream::iid(3, 2).unwrap(), 1000).unwrap();
        let r = check_orbital_nue(&rec, 0.3);
        assert!(r.pass && (r.average + LN_2).abs() < 1e-12);
        let h = pliss_times(&rec.a, LN_2 / 2.0);
        assert_eq!(hyperbolic_frequency(&h, 1000), 1.0);
        let g = rational_rotations();
        let rec = iterate(&g, point1(0.1), &SymbolStream::iid(3, 2).unwrap(), 1000).unwrap();
        let r = check_orbital_nue(&rec, 0.3);
        assert!(!r.pass && r.average.abs() < 1e-15);
    }
}
