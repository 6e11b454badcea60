//! Total orbits of the semigroup, ε-density, the weak cycle test,
//! contractivity and transitivity evidence.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::estimate_sigmas;
use crate::geometry::{Location, PhaseSpace, Point, Region};
use crate::symbolic::Word;
use crate::systems::MapFamily;

/// Tree nodes closer than this are merged.
pub const DEDUP_RES: f64 = 1e-9;
pub const DEFAULT_BUDGET: usize = 1_000_000;
/// Per-point node budget of the residual-density trees.
pub const RESIDUAL_BUDGET: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Points h(x) (forward) or h^{-1}(x) (backward) over words of length ≤ depth.
#[derive(Clone, Debug, Serialize)]
pub struct OrbitTree {
    pub root: Point,
    pub direction: Direction,
    pub depth: usize,
    pub nodes: Vec<Point>,
    #[serde(skip)]
    parent: Vec<usize>,
    #[serde(skip)]
    symbol: Vec<usize>,
    pub level: Vec<usize>,
    pub truncated: bool,
}

impl OrbitTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Symbols in the order they were applied while growing the tree.
    pub fn word(&self, node: usize, alphabet: usize) -> Word {
        let mut s = Vec::new();
        let mut i = node;
        while i != 0 {
            s.push(self.symbol[i]);
            i = self.parent[i];
        }
        s.reverse();
        Word::new(s, alphabet).expect("tree symbols are in range")
    }

    /// Distance between the root and the node's word replayed by the generators.
    pub fn replay_error(&self, fam: &MapFamily, node: usize) -> f64 {
        let w = self.word(node, fam.len());
        match self.direction {
            Direction::Forward => {
                let end = w.symbols().iter().fold(self.root, |y, &i| fam.apply(i, y));
                fam.space().distance(end, self.nodes[node])
            }
            Direction::Backward => {
                let end = w.symbols().iter().rev().fold(self.nodes[node], |y, &i| fam.apply(i, y));
                fam.space().distance(end, self.root)
            }
        }
    }
}

/// Grid hash of points at resolution `res`, wrapping on tori.
struct PointSet {
    res: f64,
    torus: bool,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl PointSet {
    fn new(res: f64, space: &PhaseSpace) -> Self {
        PointSet { res, torus: space.is_torus(), cells: HashMap::new() }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.res).floor() as i64, (p.y / self.res).floor() as i64)
    }

    fn wrap_key(&self, k: (i64, i64)) -> (i64, i64) {
        if !self.torus {
            return k;
        }
        let n = (1.0 / self.res).round() as i64;
        (k.0.rem_euclid(n), k.1.rem_euclid(n))
    }

    fn neighbours(&self, p: Point) -> impl Iterator<Item = usize> + '_ {
        let (kx, ky) = self.key(p);
        (-1..=1)
            .flat_map(move |dx| (-1..=1).map(move |dy| (kx + dx, ky + dy)))
            .filter_map(|k| self.cells.get(&self.wrap_key(k)))
            .flatten()
            .copied()
    }

    fn insert(&mut self, p: Point, idx: usize) {
        let k = self.wrap_key(self.key(p));
        self.cells.entry(k).or_default().push(idx);
    }
}

fn children(fam: &MapFamily, y: Point, dir: Direction) -> Vec<(usize, Point)> {
    let mut out = Vec::new();
    for i in 0..fam.len() {
        match dir {
            Direction::Forward => out.push((i, fam.apply(i, y))),
            Direction::Backward => out.extend(fam.preimages(i, y).into_iter().map(|x| (i, x))),
        }
    }
    out
}

/// Breadth-first growth; stops early once `stop` accepts a node and returns it.
fn grow(
    fam: &MapFamily,
    x: Point,
    dir: Direction,
    depth: usize,
    budget: usize,
    stop: impl Fn(Point) -> bool,
) -> (OrbitTree, Option<usize>) {
    let space = fam.space();
    let root = space.wrap(x);
    let mut tree = OrbitTree {
        root,
        direction: dir,
        depth,
        nodes: vec![root],
        parent: vec![0],
        symbol: vec![0],
        level: vec![0],
        truncated: false,
    };
    if stop(root) {
        return (tree, Some(0));
    }
    let mut seen = PointSet::new(DEDUP_RES, space);
    seen.insert(root, 0);
    let mut frontier = vec![0usize];
    for d in 1..=depth {
        let kids: Vec<Vec<(usize, Point)>> = frontier
            .par_iter()
            .map(|&i| children(fam, tree.nodes[i], dir))
            .collect();
        let mut next = Vec::new();
        for (&par, ks) in frontier.iter().zip(kids) {
            for (sym, p) in ks {
                let p = space.wrap(p);
                if seen.neighbours(p).any(|j| space.distance(tree.nodes[j], p) < DEDUP_RES) {
                    continue;
                }
                if tree.nodes.len() >= budget {
                    tree.truncated = true;
                    return (tree, None);
                }
                let idx = tree.nodes.len();
                tree.nodes.push(p);
                tree.parent.push(par);
                tree.symbol.push(sym);
                tree.level.push(d);
                seen.insert(p, idx);
                if stop(p) {
                    return (tree, Some(idx));
                }
                next.push(idx);
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    (tree, None)
}

pub fn orbit_tree(fam: &MapFamily, x: Point, dir: Direction, depth: usize, budget: usize) -> OrbitTree {
    grow(fam, x, dir, depth, budget, |_| false).0
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub eps: f64,
    pub probes: usize,
    pub covered: usize,
    pub coverage: f64,
    pub dense: bool,
}

/// Fraction of uniform probes within ε of some point.
pub fn eps_density(space: &PhaseSpace, points: &[Point], eps: f64, probes: usize, seed: u64) -> DensityReport {
    assert!(eps > 0.0, "eps must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe_pts: Vec<Point> = (0..probes).map(|_| space.sample(&mut rng)).collect();
    let covered = if points.is_empty() {
        0
    } else if eps >= space.diameter() {
        probes
    } else {
        let res = if space.is_torus() { 1.0 / (1.0 / eps).floor() } else { eps };
        let mut grid = PointSet::new(res, space);
        for (i, p) in points.iter().enumerate() {
            grid.insert(space.wrap(*p), i);
        }
        probe_pts
            .par_iter()
            .filter(|&&q| grid.neighbours(q).any(|j| space.distance(points[j], q) <= eps))
            .count()
    };
    DensityReport { eps, probes, covered, coverage: covered as f64 / probes.max(1) as f64, dense: covered == probes }
}

fn in_region(space: &PhaseSpace, b: &Region, p: Point) -> bool {
    space.lifts().iter().any(|k| b.contains(p + k, 0.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub start: Vec<f64>,
    /// h with start ∈ h(B), as applied symbols (first symbol applied last).
    pub word: Word,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakCycleReport {
    pub depth: usize,
    pub samples: usize,
    pub hits: usize,
    pub hit_fraction: f64,
    /// Fraction of samples hit within depth d, for d = 0..=depth.
    pub by_depth: Vec<f64>,
    pub truncated: usize,
    pub certificates: Vec<Certificate>,
    /// Hit fraction below one. A bounded depth cannot prove a negative.
    pub flagged: bool,
}

/// For sampled x, does the backward tree of depth ≤ D meet B?
pub fn weak_cycle_test(fam: &MapFamily, b: &Region, samples: usize, depth: usize, seed: u64) -> WeakCycleReport {
    let space = fam.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Point> = (0..samples).map(|_| space.sample(&mut rng)).collect();
    let results: Vec<(Option<(usize, Word)>, bool)> = starts
        .par_iter()
        .map(|&x| {
            let (tree, hit) = grow(fam, x, Direction::Backward, depth, 100_000, |p| in_region(space, b, p));
            (hit.map(|i| (tree.level[i], tree.word(i, fam.len()))), tree.truncated)
        })
        .collect();
    let mut by_depth = vec![0usize; depth + 1];
    let mut certificates = Vec::new();
    for ((hit, _), &x) in results.iter().zip(&starts) {
        if let Some((d, w)) = hit {
            by_depth[*d] += 1;
            if certificates.len() < 10 {
                let start = if fam.dim() == 1 { vec![x.x] } else { vec![x.x, x.y] };
                certificates.push(Certificate { start, word: w.clone() });
            }
        }
    }
    let mut acc = 0;
    let by_depth: Vec<f64> = by_depth
        .iter()
        .map(|&h| {
            acc += h;
            acc as f64 / samples.max(1) as f64
        })
        .collect();
    let hits = acc;
    let hit_fraction = hits as f64 / samples.max(1) as f64;
    WeakCycleReport {
        depth,
        samples,
        hits,
        hit_fraction,
        by_depth,
        truncated: results.iter().filter(|r| r.1).count(),
        certificates,
        flagged: hits < samples,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractivityReport {
    pub rho0: f64,
    /// Best (smallest image diameter) word per length 0..=D.
    pub words: Vec<Word>,
    pub diameters: Vec<f64>,
    /// Least-squares slope of ln(diameter) per symbol.
    pub rate: f64,
    pub contractive: bool,
}

fn point_cloud_diameter(space: &PhaseSpace, pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(space.distance(*a, *b));
        }
    }
    d
}

pub const CONTRACT_RHO: f64 = 0.05;

/// Beam search (width `beam`) over words of length ≤ D for the smallest image
/// of the ball B(x, ρ₀).
pub fn contractivity_probe(fam: &MapFamily, x: Point, depth: usize, beam: usize) -> ContractivityReport {
    let space = fam.space();
    let rho = CONTRACT_RHO;
    let mut ball: Vec<Point> = if fam.dim() == 1 {
        (0..=64).map(|i| space.wrap(x + Point::new(rho * (i as f64 / 32.0 - 1.0), 0.0))).collect()
    } else {
        let mut v = vec![x];
        v.extend((0..64).map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
            space.wrap(x + rho * Point::new(t.cos(), t.sin()))
        }));
        v
    };
    ball.retain(|p| space.contains(*p, 0.0));
    let d0 = point_cloud_diameter(space, &ball);
    let mut words = vec![Word::empty(fam.len())];
    let mut diameters = vec![d0];
    let mut level: Vec<(Vec<usize>, Vec<Point>, f64)> = vec![(Vec::new(), ball, d0)];
    for _ in 0..depth {
        let mut cand: Vec<(Vec<usize>, Vec<Point>, f64)> = level
            .par_iter()
            .flat_map_iter(|(w, pts, _)| {
                (0..fam.len()).map(move |i| {
                    let img: Vec<Point> = pts.iter().map(|&p| fam.apply(i, p)).collect();
                    let d = point_cloud_diameter(space, &img);
                    let mut w2 = w.clone();
                    w2.push(i);
                    (w2, img, d)
                })
            })
            .collect();
        cand.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| a.0.cmp(&b.0)));
        cand.dedup_by(|a, b| a.2 == b.2 && a.1[0] == b.1[0]);
        cand.truncate(beam.max(1));
        words.push(Word::new(cand[0].0.clone(), fam.len()).expect("symbols in range"));
        diameters.push(cand[0].2);
        level = cand;
    }
    let pts: Vec<(f64, f64)> = diameters
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| (i as f64, d.ln()))
        .collect();
    let rate = if pts.len() < 2 {
        0.0
    } else {
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    };
    let last = *diameters.last().expect("nonempty");
    ContractivityReport { rho0: rho, words, contractive: depth > 0 && rate < -1e-3 && last < d0, diameters, rate }
}

#[derive(Clone, Debug, Serialize)]
pub struct TransitivityReport {
    pub depth: usize,
    pub samples: usize,
    pub matrix: Vec<Vec<bool>>,
    pub transitive: bool,
}

/// (i, j) is true when some word of length ≤ depth maps a sample of R_i into R_j.
pub fn transitivity_matrix(fam: &MapFamily, depth: usize, samples: usize, seed: u64) -> TransitivityReport {
    let k = fam.len();
    let rows: Vec<Vec<bool>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let mut row = vec![false; k];
            row[i] = true;
            let row = RefCell::new(row);
            for _ in 0..samples {
                let x = fam.region(i).sample(&mut rng);
                // stop growing as soon as every region has been reached
                grow(fam, x, Direction::Forward, depth, 100_000, |p| {
                    let mut r = row.borrow_mut();
                    if let Location::Interior(j) = fam.locate(p) {
                        r[j] = true;
                    }
                    r.iter().all(|&b| b)
                });
                if row.borrow().iter().all(|&b| b) {
                    break;
                }
            }
            row.into_inner()
        })
        .collect();
    TransitivityReport { depth, samples, transitive: rows.iter().flatten().all(|&b| b), matrix: rows }
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub eps: f64,
    pub depth: usize,
    pub base_point: Vec<f64>,
    pub base_coverage: f64,
    pub extra_depth: usize,
    pub points: usize,
    pub fraction_dense: f64,
    /// Vacuous when the base tree is not ε-dense.
    pub pass: bool,
}

/// If one sampled forward tree is ε-dense at depth D, at least 95% of sampled
/// points should have 2ε-dense trees at depth D + ⌈log_{σ₁}(1/ε)⌉.
pub fn residual_density_check(fam: &MapFamily, eps: f64, depth: usize, points: usize, probes: usize, seed: u64) -> ResidualReport {
    let space = fam.space();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = space.sample(&mut rng);
    let base = orbit_tree(fam, x, Direction::Forward, depth, DEFAULT_BUDGET);
    let base_cov = eps_density(space, &base.nodes, eps, probes, seed ^ 1);
    let sigma1 = estimate_sigmas(fam, 64, seed).sigma1;
    let extra = if sigma1 > 1.0 { ((1.0 / eps).ln() / sigma1.ln()).ceil() as usize } else { 0 };
    let starts: Vec<Point> = (0..points).map(|_| space.sample(&mut rng)).collect();
    let dense = starts
        .par_iter()
        .enumerate()
        .filter(|(i, &y)| {
            // a truncated tree is a subset, so density of it still counts
            let t = orbit_tree(fam, y, Direction::Forward, depth + extra, RESIDUAL_BUDGET);
            eps_density(space, &t.nodes, 2.0 * eps, probes, seed.wrapping_add(*i as u64)).dense
        })
        .count();
    let fraction_dense = dense as f64 / points.max(1) as f64;
    ResidualReport {
        eps,
        depth,
        base_point: if fam.dim() == 1 { vec![x.x] } else { vec![x.x, x.y] },
        base_coverage: base_cov.coverage,
        extra_depth: extra,
        points,
        fraction_dense,
        pass: !base_cov.dense || fraction_dense >= 0.95,
    }
}
