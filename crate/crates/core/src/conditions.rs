//! Partition validity, the Markov property, the n-fold intersection property,
//! expansion rates (σ₁, σ₂), the determinant condition and the constants sheet.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cylinders::{self, cylinder};
use crate::error::{Error, Result};
use crate::geometry::{Partition, Point, Polytope, Region};
use crate::symbolic::Word;
use crate::systems::{Branch, MapFamily};

/// How a number was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Sampled { n: usize, tolerance: f64 },
    /// Root-finding to the given tolerance (nonlinear 1D branches).
    Numeric { tolerance: f64 },
    Derived,
    Configured,
}

#[derive(Clone, Debug, Serialize)]
pub struct PartitionReport {
    pub open: bool,
    pub disjoint: bool,
    pub covers: bool,
    pub pass: bool,
    pub overlap_witness: Option<(usize, usize, Vec<f64>)>,
    pub gap_witness: Option<Vec<f64>>,
    pub covered_measure: f64,
}

fn coords(p: Point, dim: usize) -> Vec<f64> {
    if dim == 1 {
        vec![p.x]
    } else {
        vec![p.x, p.y]
    }
}

/// Polytopes of `r` translated by every lattice vector that brings them near
/// the fundamental domain (just `r` on simplex complexes).
fn lifted(partition: &Partition, polys: &[Polytope]) -> Vec<Polytope> {
    let space = partition.space();
    let mut out = Vec::new();
    for q in polys {
        let (lo, hi) = q.bbox();
        for k in space.translates_meeting(lo, hi) {
            out.push(q.translate(k));
        }
    }
    out
}

fn overlap(a: &[Polytope], b: &Region) -> Option<(f64, Point)> {
    let mut total = 0.0;
    let mut witness = None;
    for p in a {
        for q in &b.polytopes {
            if let Some(x) = p.intersect(q) {
                total += x.measure();
                witness.get_or_insert(x.centroid());
            }
        }
    }
    witness.map(|w| (total, w))
}

/// Open: structural (regions are interiors of polytopes). Disjoint: exact
/// pairwise polytope intersection. Covering: exact measure balance plus a
/// sampled search for an uncovered witness.
pub fn validate_topological_partition(p: &Partition, samples: usize, seed: u64) -> PartitionReport {
    let space = p.space();
    let dim = space.dim();
    let mut overlap_witness = None;
    'outer: for i in 0..p.len() {
        let li = lifted(p, &p.region(i).polytopes);
        for j in i + 1..p.len() {
            if let Some((m, w)) = overlap(&li, p.region(j)) {
                if m > 1e-12 {
                    overlap_witness = Some((i, j, coords(space.wrap(w), dim)));
                    break 'outer;
                }
            }
        }
    }
    let covered: f64 = (0..p.len()).map(|i| p.region(i).measure()).sum();
    let mut gap_witness = None;
    if dim == 1 {
        // complement of the union of closures on the circle or segment
        let mut iv: Vec<(f64, f64)> = p
            .regions
            .iter()
            .flat_map(|r| r.polytopes.iter().map(|q| (q.bbox().0.x, q.bbox().1.x)))
            .collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (lo, hi) = space.bbox();
        let mut reach = lo.x;
        for (a, b) in iv {
            if a > reach + 1e-12 {
                gap_witness = Some(vec![(reach + a) / 2.0]);
                break;
            }
            reach = reach.max(b);
        }
        if gap_witness.is_none() && reach < hi.x - 1e-12 {
            gap_witness = Some(vec![(reach + hi.x) / 2.0]);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let y = space.sample(&mut rng);
            if p.closures_containing(y, 1e-12).is_empty() {
                gap_witness = Some(coords(y, dim));
                break;
            }
        }
    }
    let disjoint = overlap_witness.is_none();
    let balance = if disjoint { covered >= space.volume() * (1.0 - 1e-9) } else { true };
    let covers = gap_witness.is_none() && balance;
    PartitionReport {
        open: true,
        disjoint,
        covers,
        pass: disjoint && covers,
        overlap_witness,
        gap_witness,
        covered_measure: covered / space.volume(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovStatus {
    Disjoint,
    Contains,
    Violation,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkovReport {
    /// `status[i][j]` relates f_i(R_i) to R_j.
    pub status: Vec<Vec<MarkovStatus>>,
    pub violations: Vec<(usize, usize)>,
    pub pass: bool,
    pub provenance: Provenance,
}

/// Image of the closure of region i under its affine branch, lifted to the
/// translates that meet the fundamental domain.
pub fn affine_region_image(fam: &MapFamily, i: usize) -> Option<Vec<Polytope>> {
    let a = fam.maps[i].branch.as_affine()?;
    let imgs: Option<Vec<Polytope>> = fam.region(i).polytopes.iter().map(|q| q.image(a)).collect();
    Some(lifted(&fam.partition, &imgs?))
}

/// Is `y` in f_i(closure R_i)? Solves for a preimage on every relevant lift.
fn in_branch_image(fam: &MapFamily, i: usize, y: Point, tol: f64) -> bool {
    let b = &fam.maps[i].branch;
    let r = fam.region(i);
    let a = b.affine_part();
    let mut ilo = Point::repeat(f64::INFINITY);
    let mut ihi = Point::repeat(f64::NEG_INFINITY);
    for v in r.vertices() {
        ilo = ilo.inf(&a.apply(v));
        ihi = ihi.sup(&a.apply(v));
    }
    if let Branch::Sine { amplitude, axis, .. } = b {
        ilo[*axis] -= amplitude.abs();
        ihi[*axis] += amplitude.abs();
    }
    let space = fam.space();
    space.translates_meeting(ilo, ihi).into_iter().any(|k| {
        b.solve(y - k, None).is_some_and(|x| r.contains(x, tol))
    })
}

pub fn check_markov(fam: &MapFamily, samples: usize, seed: u64) -> MarkovReport {
    let n = fam.len();
    let mut status = vec![vec![MarkovStatus::Disjoint; n]; n];
    let exact = fam.is_affine();
    for i in 0..n {
        if let Some(img) = affine_region_image(fam, i) {
            for j in 0..n {
                let rj = fam.region(j);
                let m = overlap(&img, rj).map_or(0.0, |(m, _)| m);
                status[i][j] = if m <= 1e-12 * rj.measure() {
                    MarkovStatus::Disjoint
                } else if m >= (1.0 - 1e-9) * rj.measure() {
                    MarkovStatus::Contains
                } else {
                    MarkovStatus::Violation
                };
            }
        } else {
            for j in 0..n {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((i * n + j) as u64));
                let rj = fam.region(j);
                let mut pts: Vec<Point> = (0..samples).map(|_| rj.sample(&mut rng)).collect();
                // interior-biased vertices catch partial covers near corners
                let c = rj.polytopes[0].centroid();
                pts.extend(rj.vertices().into_iter().map(|v| v + (c - v) * 1e-6));
                let inside = pts.iter().filter(|&&y| in_branch_image(fam, i, y, 1e-9)).count();
                status[i][j] = if inside == 0 {
                    MarkovStatus::Disjoint
                } else if inside == pts.len() {
                    MarkovStatus::Contains
                } else {
                    MarkovStatus::Violation
                };
            }
        }
    }
    let violations: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| status[i][j] == MarkovStatus::Violation)
        .collect();
    MarkovReport {
        pass: violations.is_empty(),
        status,
        violations,
        provenance: if exact { Provenance::Exact } else { Provenance::Sampled { n: samples, tolerance: 1e-9 } },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NfoldReport {
    pub word: Word,
    pub holds: bool,
    pub vacuous: bool,
    /// First j with f_{ω_j}(R_{ω_j}) ∩ R_{ω_{j+1}} empty.
    pub empty_link: Option<usize>,
    pub cylinder_empty: bool,
    pub cylinder_measure: f64,
}

fn link_nonempty(fam: &MapFamily, i: usize, j: usize, seed: u64) -> bool {
    if let Some(img) = affine_region_image(fam, i) {
        return overlap(&img, fam.region(j)).is_some_and(|(m, _)| m > 1e-12 * fam.region(j).measure());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rj = fam.region(j);
    (0..4096).any(|_| in_branch_image(fam, i, rj.sample(&mut rng), 0.0))
}

pub fn check_nfold_intersection(fam: &MapFamily, word: &Word, samples: usize, seed: u64) -> Result<NfoldReport> {
    if word.len() < 3 {
        return Err(Error::WordTooShort(word.len()));
    }
    let w = word.symbols();
    let empty_link = (0..w.len() - 1).find(|&j| !link_nonempty(fam, w[j], w[j + 1], seed));
    if empty_link.is_some() {
        return Ok(NfoldReport {
            word: word.clone(),
            holds: true,
            vacuous: true,
            empty_link,
            cylinder_empty: false,
            cylinder_measure: f64::NAN,
        });
    }
    let cyl = cylinder(fam, word, samples, seed)?;
    Ok(NfoldReport {
        word: word.clone(),
        holds: !cyl.empty,
        vacuous: false,
        empty_link: None,
        cylinder_empty: cyl.empty,
        cylinder_measure: cyl.measure,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SigmaReport {
    pub sigma1: f64,
    pub sigma2: f64,
    /// Infimum of the smallest singular value of Df_i over R_i, per map.
    pub min_singular: Vec<f64>,
    /// Supremum of the operator norm of Df_i over R_i, per map.
    pub max_norm: Vec<f64>,
    pub not_expanding: bool,
    pub provenance: Provenance,
}

/// Sample points of the closure of region i: vertices, then random interior points.
pub(crate) fn region_probe(fam: &MapFamily, i: usize, samples: usize, seed: u64) -> Vec<Point> {
    let r = fam.region(i);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
    let mut pts = r.vertices();
    pts.extend((0..samples).map(|_| r.sample(&mut rng)));
    pts
}

pub fn estimate_sigmas(fam: &MapFamily, samples: usize, seed: u64) -> SigmaReport {
    let mut min_singular = Vec::with_capacity(fam.len());
    let mut max_norm = Vec::with_capacity(fam.len());
    for (i, m) in fam.maps.iter().enumerate() {
        let (lo, hi) = match &m.branch {
            Branch::Affine(a) => a.linear.singular_values(),
            b => region_probe(fam, i, samples.max(1), seed).iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
                let (s, t) = b.jacobian(x).singular_values();
                (lo.min(s), hi.max(t))
            }),
        };
        min_singular.push(lo);
        max_norm.push(hi);
    }
    let sigma1 = if fam.p == 0 { 1.0 } else { min_singular[..fam.p].iter().copied().fold(f64::INFINITY, f64::min) };
    let sigma2 = min_singular[fam.p..].iter().map(|s| 1.0 / s).fold(1.0f64, f64::max);
    SigmaReport {
        sigma1,
        sigma2,
        min_singular,
        max_norm,
        not_expanding: !(sigma1 > 1.0),
        provenance: if fam.is_affine() {
            Provenance::Exact
        } else {
            Provenance::Sampled { n: samples, tolerance: 0.0 }
        },
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DetReport {
    pub holds: bool,
    pub q: usize,
    /// Infimum of |det Df| over each near-neutral region.
    pub min_abs_det: Vec<f64>,
    pub provenance: Provenance,
}

pub fn check_det_condition(fam: &MapFamily, samples: usize, seed: u64) -> Result<DetReport> {
    if fam.q == 0 {
        return Err(Error::BadParameter("determinant condition needs q >= 1".into()));
    }
    let min_abs_det: Vec<f64> = (fam.p..fam.len())
        .map(|i| match &fam.maps[i].branch {
            Branch::Affine(a) => a.linear.det().abs(),
            b => region_probe(fam, i, samples.max(1), seed)
                .iter()
                .map(|&x| b.jacobian(x).det().abs())
                .fold(f64::INFINITY, f64::min),
        })
        .collect();
    Ok(DetReport {
        holds: min_abs_det.iter().all(|&d| d > fam.q as f64),
        q: fam.q,
        min_abs_det,
        provenance: if fam.is_affine() {
            Provenance::Exact
        } else {
            Provenance::Sampled { n: samples, tolerance: 0.0 }
        },
    })
}

/// Smallest ε₀ with σ₁^{-ε₀} σ₂^{1-ε₀} ≤ e^{-c}, if it lies in (0,1).
pub fn derive_epsilon0(sigma1: f64, sigma2: f64, c: f64) -> Option<f64> {
    if !(sigma1 > 1.0 && sigma2 >= 1.0 && c > 0.0) {
        return None;
    }
    let e = (c + sigma2.ln()) / (sigma1.ln() + sigma2.ln());
    (e > 0.0 && e < 1.0).then_some(e)
}

/// σ₁, σ₂ and the default working level c with its ε₀.
#[derive(Clone, Debug, Serialize)]
pub struct BaseConstants {
    pub sigma1: f64,
    pub sigma2: f64,
    /// Lebesgue measure of the expanding regions.
    pub expanding_measure: f64,
    /// Largest c for which the expanding fraction can sustain the rate.
    pub c_max: f64,
    pub c: f64,
    pub epsilon0: Option<f64>,
}

/// Default c is half of c_max = f·ln σ₁ - (1-f)·ln σ₂, where f is the
/// measure of the expanding regions (the time an orbit spends there).
pub fn default_constants(fam: &MapFamily) -> Result<BaseConstants> {
    let s = estimate_sigmas(fam, 256, 0);
    let f: f64 = (0..fam.p).map(|i| fam.partition.measure(i)).sum();
    let (l1, l2) = (s.sigma1.ln(), s.sigma2.ln());
    let c_max = f * (l1 + l2) - l2;
    let c = if c_max > 0.0 { c_max / 2.0 } else { 0.0 };
    Ok(BaseConstants {
        sigma1: s.sigma1,
        sigma2: s.sigma2,
        expanding_measure: f,
        c_max,
        c,
        epsilon0: derive_epsilon0(s.sigma1, s.sigma2, c),
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

impl Constant {
    fn new(value: f64, provenance: Provenance) -> Self {
        Constant { value, provenance }
    }
}

/// Every named constant of the theory with its provenance.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsSheet {
    pub sigma1: Constant,
    pub sigma2: Constant,
    pub c: Constant,
    pub epsilon0: Option<Constant>,
    pub k1: Constant,
    pub k2: Constant,
    pub c0: Constant,
    pub alpha: Constant,
    pub l1: Constant,
    pub l2: Constant,
    pub r: Option<Constant>,
    /// σ₁^{-ε₀} σ₂^{1-ε₀} ≤ e^{-c} holds for the reported pair.
    pub consistent: bool,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub c: Option<f64>,
    pub epsilon0: Option<f64>,
}

pub fn constants_sheet(fam: &MapFamily, overrides: Overrides, estimate_radius: bool, seed: u64) -> Result<ConstantsSheet> {
    let sig = estimate_sigmas(fam, 512, seed);
    let base = default_constants(fam)?;
    let sp = sig.provenance;
    let (c, cp) = match overrides.c {
        Some(c) => (c, Provenance::Configured),
        None => (base.c, Provenance::Derived),
    };
    if !(c > 0.0) {
        return Err(Error::BadConstants(format!("c = {c} must be positive")));
    }
    let epsilon0 = match overrides.epsilon0 {
        Some(e) => Some(Constant::new(e, Provenance::Configured)),
        None => derive_epsilon0(sig.sigma1, sig.sigma2, c).map(|e| Constant::new(e, Provenance::Derived)),
    };
    let consistent = epsilon0.is_some_and(|e| {
        e.value > 0.0
            && e.value < 1.0
            && -e.value * sig.sigma1.ln() + (1.0 - e.value) * sig.sigma2.ln() <= -c + 1e-12
    });
    let k2 = cylinders::k2_bound(fam, 512, seed)?;
    let c0 = fam.maps.iter().map(|m| m.hoelder.c0).fold(0.0, f64::max);
    let alpha = fam.maps.iter().map(|m| m.hoelder.alpha).fold(1.0, f64::min);
    let l1 = cylinders::l1_bound(c0, alpha, k2.k2, c)?;
    let kp = if k2.exact { Provenance::Exact } else { Provenance::Sampled { n: 512, tolerance: 1e-3 } };
    let hp = if fam.maps.iter().all(|m| m.hoelder.exact) { Provenance::Exact } else { Provenance::Derived };
    let r = if estimate_radius {
        Some(Constant::new(
            cylinders::estimate_r(fam, c, 200, seed)?.r,
            Provenance::Sampled { n: 200, tolerance: 0.0 },
        ))
    } else {
        None
    };
    Ok(ConstantsSheet {
        sigma1: Constant::new(sig.sigma1, sp),
        sigma2: Constant::new(sig.sigma2, sp),
        c: Constant::new(c, cp),
        epsilon0,
        k1: Constant::new(k2.k1, kp),
        k2: Constant::new(k2.k2, kp),
        c0: Constant::new(c0, hp),
        alpha: Constant::new(alpha, hp),
        l1: Constant::new(l1, Provenance::Derived),
        l2: Constant::new(l1, Provenance::Derived),
        r,
        consistent,
    })
}
