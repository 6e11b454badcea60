//! Empirical ergodicity: Birkhoff averages against Lebesgue integrals,
//! occupation statistics and a cell-level search for invariant sets.
//!
//! None of this proves ergodicity. The contract is falsification power:
//! families with invariant sets of intermediate measure must fail.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::Provenance;
use crate::error::{Error, Result};
use crate::expansion::Walker;
use crate::geometry::{Location, PhaseSpace, Point, Polytope, Region};
use crate::symbolic::{StreamKindName, SymbolStream};
use crate::systems::{Branch, Extension, MapFamily};

pub const CAVEAT: &str = "numerical falsification test: a pass is evidence, not proof; \
Birkhoff limits are compared with Lebesgue integrals, which is meaningful when Lebesgue measure \
is invariant and only quasi-invariance is guaranteed in general";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    Constant { value: f64 },
    /// cos(2π (k₁x + k₂y)).
    Cosine { frequency: [i32; 2] },
    Indicator { region: Region },
    Coordinate { axis: usize },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Constant { value } => format!("const({value})"),
            Observable::Cosine { frequency: [a, b] } => format!("cos({a},{b})"),
            Observable::Indicator { .. } => "indicator".into(),
            Observable::Coordinate { axis } => ["x", "y"][(*axis).min(1)].into(),
        }
    }

    pub fn eval(&self, space: &PhaseSpace, p: Point) -> f64 {
        match self {
            Observable::Constant { value } => *value,
            Observable::Cosine { frequency: [a, b] } => {
                (2.0 * std::f64::consts::PI * (*a as f64 * p.x + *b as f64 * p.y)).cos()
            }
            Observable::Indicator { region } => {
                let hit = space.lifts().iter().any(|k| region.contains(p + k, 0.0));
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
            Observable::Coordinate { axis } => p[*axis],
        }
    }

    /// Normalized Lebesgue integral, when known in closed form.
    pub fn exact_integral(&self, space: &PhaseSpace) -> Option<f64> {
        match self {
            Observable::Constant { value } => Some(*value),
            Observable::Cosine { frequency } => match space {
                PhaseSpace::Torus { .. } => Some(if *frequency == [0, 0] { 1.0 } else { 0.0 }),
                _ => None,
            },
            Observable::Indicator { region } => Some(region.measure() / space.volume()),
            Observable::Coordinate { axis } => match space {
                PhaseSpace::Torus { .. } => Some(0.5),
                _ => {
                    let s = space.simplices();
                    Some(s.iter().map(|t| t.volume() * t.barycenter()[*axis]).sum::<f64>() / space.volume())
                }
            },
        }
    }
}

/// Cosine, the indicator of R_0 and every coordinate.
pub fn default_observables(fam: &MapFamily) -> Vec<Observable> {
    let mut v = vec![
        Observable::Cosine { frequency: [1, 0] },
        Observable::Indicator { region: fam.region(0).clone() },
    ];
    v.extend((0..fam.dim()).map(|axis| Observable::Coordinate { axis }));
    v
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Visit y_0 .. y_{n-1} along the stream without storing the orbit. Returns
/// the number of points visited and the step of a skeleton hit, if any.
fn walk(fam: &MapFamily, x: Point, s: &SymbolStream, n: usize, mut visit: impl FnMut(Point)) -> Result<(usize, Option<usize>)> {
    if !matches!(fam.locate(x), Location::Interior(_)) {
        return Err(Error::BoundaryStart);
    }
    let itin = s.is_itinerary();
    let mut reader = if itin { None } else { Some(s.reader(n)?) };
    let need_loc = itin || (0..fam.len()).any(|i| fam.needs_location(i));
    let mut w = Walker::new(fam, x);
    for j in 0..n {
        let y = w.point();
        let loc = if need_loc { w.locate() } else { Location::Outside };
        if need_loc && !matches!(loc, Location::Interior(_)) {
            return Ok((j, Some(j)));
        }
        visit(y);
        let sym = match (&mut reader, loc) {
            (Some(r), _) => r.next_symbol(),
            (None, Location::Interior(l)) => l,
            _ => unreachable!("itinerary streams always locate"),
        };
        w.step(sym, loc);
    }
    Ok((n, None))
}

#[derive(Clone, Debug, Serialize)]
pub struct BirkhoffResult {
    pub averages: Vec<f64>,
    pub steps: usize,
    /// Set when the orbit met the skeleton; averages cover the prefix.
    pub truncated_at: Option<usize>,
}

pub fn birkhoff_averages(fam: &MapFamily, obs: &[Observable], x: Point, s: &SymbolStream, n: usize) -> Result<BirkhoffResult> {
    if n == 0 {
        return Err(Error::BadParameter("horizon must be at least 1".into()));
    }
    let space = fam.space();
    let mut sums = vec![Neumaier::default(); obs.len()];
    let (steps, truncated_at) = walk(fam, x, s, n, |y| {
        for (acc, o) in sums.iter_mut().zip(obs) {
            acc.add(o.eval(space, y));
        }
    })?;
    let averages = sums.iter().map(|a| a.value() / steps.max(1) as f64).collect();
    Ok(BirkhoffResult { averages, steps, truncated_at })
}

/// (1/n) Σ_{j<n} obs(y_j).
pub fn birkhoff_average(fam: &MapFamily, obs: &Observable, x: Point, s: &SymbolStream, n: usize) -> Result<f64> {
    Ok(birkhoff_averages(fam, std::slice::from_ref(obs), x, s, n)?.averages[0])
}

/// Mean and standard error over n uniform samples.
pub fn lebesgue_integral_mc(space: &PhaseSpace, obs: &Observable, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 1..=n.max(1) {
        let v = obs.eval(space, space.sample(&mut rng));
        let d = v - mean;
        mean += d / k as f64;
        m2 += d * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, (var / n.max(1) as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentStream {
    IidUniform,
    ItineraryDriven,
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservableSummary {
    pub name: String,
    pub averages: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub integral: f64,
    pub integral_provenance: Provenance,
    pub deviation: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErgodicityReport {
    pub family: String,
    pub horizon: usize,
    pub starts: Vec<Vec<f64>>,
    pub stream: StreamKindName,
    pub seed: u64,
    pub tolerance: f64,
    pub truncated: usize,
    pub observables: Vec<ObservableSummary>,
    pub pass: bool,
    pub caveat: &'static str,
}

fn interior_sample(fam: &MapFamily, rng: &mut ChaCha8Rng) -> Point {
    loop {
        let x = fam.space().sample(rng);
        if matches!(fam.locate(x), Location::Interior(_)) {
            return x;
        }
    }
}

/// Birkhoff averages from `starts` random points. Passes when, for every
/// observable, the cross-start std and the distance of the mean from the
/// Lebesgue integral are both below max(10⁻², 6/√n).
pub fn ergodicity_experiment(
    fam: &MapFamily,
    observables: &[Observable],
    starts: usize,
    n: usize,
    stream: ExperimentStream,
    seed: u64,
) -> Result<ErgodicityReport> {
    if starts == 0 {
        return Err(Error::BadParameter("need at least one start".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Point> = (0..starts).map(|_| interior_sample(fam, &mut rng)).collect();
    let source = Arc::new(fam.clone());
    let runs: Vec<BirkhoffResult> = xs
        .par_iter()
        .enumerate()
        .map(|(j, &x)| {
            let s = match stream {
                ExperimentStream::IidUniform => SymbolStream::iid(seed.wrapping_add(1 + j as u64), fam.len())?,
                ExperimentStream::ItineraryDriven => SymbolStream::itinerary(source.clone(), x),
            };
            birkhoff_averages(fam, observables, x, &s, n)
        })
        .collect::<Result<_>>()?;
    let tolerance = f64::max(1e-2, 6.0 / (n as f64).sqrt());
    let summaries: Vec<ObservableSummary> = observables
        .iter()
        .enumerate()
        .map(|(k, o)| {
            let averages: Vec<f64> = runs.iter().map(|r| r.averages[k]).collect();
            let m = averages.len() as f64;
            let mean = averages.iter().sum::<f64>() / m;
            let std = (averages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / m).sqrt();
            let (integral, integral_provenance) = match o.exact_integral(fam.space()) {
                Some(v) => (v, Provenance::Exact),
                None => {
                    let n_mc = 1_000_000;
                    let (v, se) = lebesgue_integral_mc(fam.space(), o, n_mc, seed ^ 0x5eed);
                    (v, Provenance::Sampled { n: n_mc, tolerance: 3.0 * se })
                }
            };
            let deviation = (mean - integral).abs();
            ObservableSummary {
                name: o.name(),
                pass: std < tolerance && deviation < tolerance,
                averages,
                mean,
                std,
                integral,
                integral_provenance,
                deviation,
            }
        })
        .collect();
    Ok(ErgodicityReport {
        family: fam.name.clone(),
        horizon: n,
        starts: xs.iter().map(|p| if fam.dim() == 1 { vec![p.x] } else { vec![p.x, p.y] }).collect(),
        stream: match stream {
            ExperimentStream::IidUniform => StreamKindName::IidUniform,
            ExperimentStream::ItineraryDriven => StreamKindName::ItineraryDriven,
        },
        seed,
        tolerance,
        truncated: runs.iter().filter(|r| r.truncated_at.is_some()).count(),
        pass: summaries.iter().all(|s| s.pass),
        observables: summaries,
        caveat: CAVEAT,
    })
}

/// Grid cells of the bounding box clipped to M, dropping empty ones. Cell
/// (ix, iy) is returned with its region.
pub fn grid_cells(space: &PhaseSpace, per_axis: usize) -> Vec<((usize, usize), Region)> {
    let (lo, hi) = space.bbox();
    let g = per_axis as f64;
    let mut out = Vec::new();
    if space.dim() == 1 {
        for i in 0..per_axis {
            let a = lo.x + (hi.x - lo.x) * i as f64 / g;
            let b = lo.x + (hi.x - lo.x) * (i + 1) as f64 / g;
            out.push(((i, 0), Region::interval(a, b).expect("cell")));
        }
        return out;
    }
    let simplices: Vec<Polytope> = match space {
        PhaseSpace::Torus { .. } => Vec::new(),
        _ => space.simplices().iter().map(|s| s.to_polytope()).collect(),
    };
    let (w, h) = ((hi.x - lo.x) / g, (hi.y - lo.y) / g);
    for j in 0..per_axis {
        for i in 0..per_axis {
            let (x0, y0) = (lo.x + w * i as f64, lo.y + h * j as f64);
            let sq = Polytope::polygon(vec![
                Point::new(x0, y0),
                Point::new(x0 + w, y0),
                Point::new(x0 + w, y0 + h),
                Point::new(x0, y0 + h),
            ])
            .expect("square");
            let pieces: Vec<Polytope> = if simplices.is_empty() {
                vec![sq]
            } else {
                simplices
                    .iter()
                    .filter_map(|s| s.intersect(&sq))
                    .filter(|p| p.measure() > 1e-12 * w * h)
                    .collect()
            };
            if !pieces.is_empty() {
                out.push(((i, j), Region { polytopes: pieces }));
            }
        }
    }
    out
}

/// Equal boxes covering M (clipped to M on complexes).
pub fn grid_boxes(space: &PhaseSpace, per_axis: usize) -> Vec<Region> {
    grid_cells(space, per_axis).into_iter().map(|(_, r)| r).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct EquidistributionReport {
    pub n: usize,
    pub boxes: usize,
    pub counts: Vec<usize>,
    pub unassigned: usize,
    pub chi2: f64,
    /// χ² / (boxes - 1).
    pub normalized: f64,
    pub pass: bool,
}

/// χ² of box occupation counts against Lebesgue box volumes.
pub fn occupation_statistic(space: &PhaseSpace, points: impl IntoIterator<Item = Point>, boxes: &[Region]) -> Result<EquidistributionReport> {
    let vols: Vec<f64> = boxes.iter().map(|b| b.measure() / space.volume()).collect();
    if boxes.len() < 2 || vols.iter().any(|&v| v <= 1e-15) {
        return Err(Error::DegenerateBoxes);
    }
    let lifts = space.lifts();
    let mut counts = vec![0usize; boxes.len()];
    let mut unassigned = 0;
    let mut n = 0;
    for p in points {
        n += 1;
        match boxes.iter().position(|b| lifts.iter().any(|k| b.contains(p + k, 1e-12))) {
            Some(i) => counts[i] += 1,
            None => unassigned += 1,
        }
    }
    let chi2: f64 = counts
        .iter()
        .zip(&vols)
        .map(|(&o, &v)| {
            let e = n as f64 * v;
            (o as f64 - e).powi(2) / e
        })
        .sum();
    let normalized = chi2 / (boxes.len() - 1) as f64;
    Ok(EquidistributionReport { n, boxes: boxes.len(), counts, unassigned, chi2, normalized, pass: normalized < 1.5 })
}

/// Occupation statistic of y_0 .. y_{n-1}.
pub fn equidistribution_test(fam: &MapFamily, x: Point, s: &SymbolStream, n: usize, boxes: &[Region]) -> Result<EquidistributionReport> {
    let mut pts = Vec::with_capacity(n);
    walk(fam, x, s, n, |y| pts.push(y))?;
    occupation_statistic(fam.space(), pts, boxes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeStatus {
    Fixpoint,
    NoFixpoint,
    Trivial,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantSet {
    pub cells: usize,
    pub measure: f64,
    /// Rounds of forward closure from one cell until the set stops growing.
    pub rounds: usize,
    /// Image of the set stays inside it (re-checked after the fact).
    pub closed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub grid: usize,
    pub iterations: usize,
    pub cells: usize,
    pub status: ProbeStatus,
    /// Minimal forward-invariant cell sets (closed classes of the cell graph).
    pub sets: Vec<InvariantSet>,
    pub threshold: f64,
    /// Every minimal invariant set is near-full.
    pub only_full: bool,
    pub provenance: Provenance,
    pub caveat: &'static str,
}

fn branch_image(b: &Branch, p: &Polytope) -> Option<Polytope> {
    match (b, p) {
        (Branch::Affine(a), _) => p.image(a),
        (_, Polytope::Interval { lo, hi }) => {
            let (u, v) = (b.apply(Point::new(*lo, 0.0)).x, b.apply(Point::new(*hi, 0.0)).x);
            Polytope::interval(u.min(v), u.max(v)).ok()
        }
        _ => None,
    }
}

/// Seeds every grid cell and closes it under forward images of all
/// generators (outer approximation at cell level).
pub fn invariant_set_probe(fam: &MapFamily, g: usize, iterations: usize) -> Result<InvariantReport> {
    if g < 16 {
        return Err(Error::BadParameter("grid resolution must be at least 16".into()));
    }
    let space = fam.space();
    let cells = grid_cells(space, g);
    let measure: Vec<f64> = cells.iter().map(|(_, r)| r.measure() / space.volume()).collect();
    let threshold = 1.0 - 2.0 * fam.dim() as f64 / g as f64;
    let caveat = CAVEAT;
    if iterations == 0 {
        return Ok(InvariantReport {
            grid: g,
            iterations,
            cells: cells.len(),
            status: ProbeStatus::Trivial,
            sets: Vec::new(),
            threshold,
            only_full: false,
            provenance: Provenance::Exact,
            caveat,
        });
    }
    let index: HashMap<(usize, usize), usize> = cells.iter().enumerate().map(|(i, (k, _))| (*k, i)).collect();
    let (lo, hi) = space.bbox();
    let cw = Point::new((hi.x - lo.x) / g as f64, if fam.dim() == 2 { (hi.y - lo.y) / g as f64 } else { 1.0 });
    let exact = fam.is_affine() || fam.dim() == 1;

    // cells meeting `q` (in the cover) with positive measure
    let hits = |q: &Polytope, out: &mut Vec<usize>| {
        let (qlo, qhi) = q.bbox();
        for k in space.translates_meeting(qlo, qhi) {
            let q = q.translate(k);
            let (a, b) = q.bbox();
            let rng = |c: usize| {
                let s = ((a[c] - lo[c]) / cw[c]).floor().max(0.0) as usize;
                let e = (((b[c] - lo[c]) / cw[c]).ceil() as usize).min(g);
                s..e
            };
            let ys = if fam.dim() == 2 { rng(1) } else { 0..1 };
            for j in ys {
                for i in rng(0) {
                    let Some(&c) = index.get(&(i, j)) else { continue };
                    let m: f64 = cells[c].1.polytopes.iter().filter_map(|p| p.intersect(&q)).map(|p| p.measure()).sum();
                    if m > 1e-9 * cw.x * cw.y {
                        out.push(c);
                    }
                }
            }
        }
    };
    let edges: Vec<Vec<usize>> = cells
        .par_iter()
        .map(|(_, cell)| {
            let mut out = Vec::new();
            for i in 0..fam.len() {
                let pieces: Vec<(usize, Polytope)> = match fam.maps[i].extension {
                    Extension::Wrap => cell.polytopes.iter().map(|p| (i, p.clone())).collect(),
                    Extension::ChartWise => (0..fam.len())
                        .flat_map(|l| {
                            cell.polytopes.iter().flat_map(move |p| {
                                let r = fam.region(l);
                                space.lifts().into_iter().flat_map(move |k| {
                                    r.polytopes.iter().filter_map(move |rp| p.intersect(&rp.translate(k))).map(move |x| (l, x))
                                })
                            })
                        })
                        .filter(|(_, x)| x.measure() > 1e-12 * cw.x * cw.y)
                        .collect(),
                };
                for (l, p) in pieces {
                    let b = &fam.maps[l].branch;
                    match branch_image(b, &p) {
                        Some(q) if exact => hits(&q, &mut out),
                        _ => {
                            let mut rng = ChaCha8Rng::seed_from_u64(out.len() as u64);
                            for _ in 0..16 {
                                let y = space.wrap(b.apply(p.sample(&mut rng)));
                                let key = ((((y.x - lo.x) / cw.x) as usize).min(g - 1), (((y.y - lo.y) / cw.y) as usize).min(g - 1));
                                if let Some(&c) = index.get(&if fam.dim() == 1 { (key.0, 0) } else { key }) {
                                    out.push(c);
                                }
                            }
                        }
                    }
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();

    let mut graph = DiGraph::<(), ()>::with_capacity(cells.len(), 0);
    let nodes: Vec<_> = (0..cells.len()).map(|_| graph.add_node(())).collect();
    for (a, outs) in edges.iter().enumerate() {
        for &b in outs {
            graph.add_edge(nodes[a], nodes[b], ());
        }
    }
    let sccs = tarjan_scc(&graph);
    let mut comp = vec![0usize; cells.len()];
    for (ci, s) in sccs.iter().enumerate() {
        for n in s {
            comp[n.index()] = ci;
        }
    }
    let mut sets = Vec::new();
    let mut status = ProbeStatus::Fixpoint;
    for (ci, s) in sccs.iter().enumerate() {
        let members: Vec<usize> = s.iter().map(|n| n.index()).collect();
        let terminal = members.iter().all(|&a| edges[a].iter().all(|&b| comp[b] == ci));
        if !terminal {
            continue;
        }
        // forward closure of one seed cell, round by round
        let seed = *members.iter().min().expect("nonempty component");
        let mut seen = vec![false; cells.len()];
        seen[seed] = true;
        let mut queue = VecDeque::from([(seed, 0usize)]);
        let mut rounds = 0;
        while let Some((a, d)) = queue.pop_front() {
            rounds = rounds.max(d);
            for &b in &edges[a] {
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back((b, d + 1));
                }
            }
        }
        if rounds > iterations {
            status = ProbeStatus::NoFixpoint;
        }
        let closed = members.iter().all(|&a| edges[a].iter().all(|&b| seen[b]));
        sets.push(InvariantSet {
            cells: members.len(),
            measure: members.iter().map(|&a| measure[a]).sum(),
            rounds,
            closed,
        });
    }
    sets.sort_by(|a, b| b.measure.total_cmp(&a.measure));
    Ok(InvariantReport {
        grid: g,
        iterations,
        cells: cells.len(),
        status,
        only_full: sets.iter().all(|s| s.measure >= threshold),
        sets,
        threshold,
        provenance: if exact { Provenance::Exact } else { Provenance::Sampled { n: 16, tolerance: 0.0 } },
        caveat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point1;
    use crate::systems::{doubling, rational_rotations, two_arc_control};
    use rand::Rng;

    #[test]
    fn constant_observable_is_exact() {
        let f = doubling();
        let s = SymbolStream::iid(4, 2).unwrap();
        let one = Observable::Constant { value: 1.0 };
        assert_eq!(birkhoff_average(&f, &one, point1(0.3), &s, 12345).unwrap(), 1.0);
        assert_eq!(lebesgue_integral_mc(f.space(), &Observable::Constant { value: 2.5 }, 100, 0), (2.5, 0.0));
        let (m, se) = lebesgue_integral_mc(f.space(), &Observable::Cosine { frequency: [1, 0] }, 10_000, 0);
        assert!(m.abs() < 3.0 / 100.0 && se > 0.0);
    }

    #[test]
    fn doubling_averages() {
        let f = doubling();
        let s = SymbolStream::iid(9, 2).unwrap();
        let obs = default_observables(&f);
        let r = birkhoff_averages(&f, &obs, point1(0.1234), &s, 200_000).unwrap();
        assert!(r.averages[0].abs() < 1e-2);
        assert!((r.averages[1] - 0.5).abs() < 1e-2);
    }

    #[test]
    fn experiment_separates_control() {
        let obs = default_observables(&doubling());
        let ok = ergodicity_experiment(&doubling(), &obs, 4, 100_000, ExperimentStream::IidUniform, 1).unwrap();
        assert!(ok.pass);
        let again = ergodicity_experiment(&doubling(), &obs, 4, 100_000, ExperimentStream::IidUniform, 1).unwrap();
        assert_eq!(serde_json::to_string(&ok).unwrap(), serde_json::to_string(&again).unwrap());
        let ctl = two_arc_control();
        let bad = ergodicity_experiment(&ctl, &default_observables(&ctl), 8, 100_000, ExperimentStream::IidUniform, 1).unwrap();
        assert!(!bad.pass);
    }

    #[test]
    fn occupation_calibration() {
        let space = PhaseSpace::torus(1).unwrap();
        let boxes = grid_boxes(&space, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point> = (0..100_000).map(|_| point1(rng.random())).collect();
        let r = occupation_statistic(&space, pts, &boxes).unwrap();
        assert!(r.normalized < 2.0 && r.normalized > 0.3);
        let fixed = occupation_statistic(&space, vec![point1(0.3); 1000], &boxes).unwrap();
        assert!(!fixed.pass);
        let bad = vec![Region::interval(0.0, 1.0).unwrap(), Region::interval(0.5, 0.5 + 1e-18).unwrap_or_else(|_| Region { polytopes: vec![] })];
        assert_eq!(occupation_statistic(&space, vec![point1(0.3)], &bad).unwrap_err().code(), "degenerate-boxes");
    }

    #[test]
    fn invariant_sets() {
        let full = invariant_set_probe(&doubling(), 256, 100).unwrap();
        assert_eq!(full.status, ProbeStatus::Fixpoint);
        assert_eq!(full.sets.len(), 1);
        assert!((full.sets[0].measure - 1.0).abs() < 1e-12 && full.only_full);
        let ctl = invariant_set_probe(&two_arc_control(), 256, 100).unwrap();
        assert_eq!(ctl.sets.len(), 2);
        assert!(ctl.sets.iter().all(|s| (s.measure - 0.5).abs() <= 2.0 / 256.0 && s.closed));
        assert!(!ctl.only_full);
        let rot = invariant_set_probe(&rational_rotations(), 64, 100).unwrap();
        assert!(!rot.only_full);
        assert_eq!(invariant_set_probe(&doubling(), 32, 0).unwrap().status, ProbeStatus::Trivial);
        assert_eq!(invariant_set_probe(&doubling(), 8, 3).unwrap_err().code(), "bad-parameter");
    }
}
