//! Cylinder sets, hyperbolic cylinders, diameter decay, distortion and the
//! dynamical-ball contract.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{estimate_sigmas, Provenance};
use crate::error::{Error, Result};
use crate::expansion::{iterate, itinerary, pliss_times};
use crate::geometry::{closure_inner_diameter, Linear, Partition, Point, Polytope, Region};
use crate::symbolic::{SymbolStream, Word};
use crate::systems::{Branch, MapFamily};

/// Replay tolerance for cylinder membership.
pub const REPLAY_TOL: f64 = 1e-10;
/// Rejection sampling gives up on a cylinder after this many proposals.
pub const EMPTY_PROPOSALS: usize = 10_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct Cylinder {
    pub word: Word,
    /// Closure as polytopes in the chart of R_{ω_0}; present for affine
    /// families and for nonlinear interval maps.
    pub pieces: Option<Vec<Polytope>>,
    pub samples: Vec<Point>,
    pub empty: bool,
    /// Normalized Lebesgue measure; estimated for sampled cylinders, and an
    /// upper bound when a sampled cylinder is declared empty.
    pub measure: f64,
    pub provenance: Provenance,
    /// Proposals used by rejection sampling (0 otherwise).
    pub proposals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum TriState {
    Yes,
    No { witness: Vec<f64> },
    Unknown { samples: usize },
}

fn region_contains(partition: &Partition, l: usize, y: Point, tol: f64) -> bool {
    let space = partition.space();
    let y = space.wrap(y);
    space.lifts().iter().any(|k| partition.region(l).contains(y + k, tol))
}

/// Does the orbit of x under the local branches follow `word`?
pub fn in_cylinder(fam: &MapFamily, word: &[usize], x: Point, tol: f64) -> bool {
    let mut y = x;
    for &w in word {
        if !region_contains(&fam.partition, w, y, tol) {
            return false;
        }
        y = fam.space().wrap(fam.local(w, y));
    }
    true
}

/// Orbit of x under the local branches of `word`, wrapped into M.
fn local_orbit(fam: &MapFamily, word: &[usize], x: Point) -> Vec<Point> {
    let mut pts = Vec::with_capacity(word.len() + 1);
    let mut y = x;
    pts.push(y);
    for &w in word {
        y = fam.space().wrap(fam.local(w, y));
        pts.push(y);
    }
    pts
}

/// Lattice translates k for which `(box + k)` meets `target`.
fn translates_between(fam: &MapFamily, lo: Point, hi: Point, tlo: Point, thi: Point) -> Vec<Point> {
    if !fam.space().is_torus() {
        return vec![Point::zeros()];
    }
    let range = |c: usize| ((tlo[c] - hi[c] - 1e-9).ceil() as i64)..=((thi[c] - lo[c] + 1e-9).floor() as i64);
    let ys: Vec<i64> = if fam.dim() == 2 { range(1).collect() } else { vec![0] };
    let mut out = Vec::new();
    for kx in range(0) {
        for &ky in &ys {
            out.push(Point::new(kx as f64, ky as f64));
        }
    }
    out
}

/// x in [lo, hi] with b(x) = y for a monotone 1D branch, by bisection.
fn bisect(b: &Branch, y: f64, lo: f64, hi: f64) -> f64 {
    let f = |x: f64| b.apply(Point::new(x, 0.0)).x - y;
    let (mut a, mut c) = (lo, hi);
    let inc = f(c) > f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + c);
        if (f(m) < 0.0) == inc {
            a = m;
        } else {
            c = m;
        }
        if c - a <= f64::EPSILON * (1.0 + m.abs()) {
            break;
        }
    }
    0.5 * (a + c)
}

/// Preimage of `target` under the branch of region l, inside R̄_l.
fn pullback(fam: &MapFamily, l: usize, target: &[Polytope]) -> Vec<Polytope> {
    let branch = &fam.maps[l].branch;
    let region = fam.region(l);
    let mut out = Vec::new();
    for rp in &region.polytopes {
        match branch {
            Branch::Affine(a) => {
                let Some(img) = rp.image(a) else { continue };
                let (ilo, ihi) = img.bbox();
                let inv = a.inverse().expect("injective branch");
                for q in target {
                    let (qlo, qhi) = q.bbox();
                    for k in translates_between(fam, qlo, qhi, ilo, ihi) {
                        let Some(pre) = q.translate(k).image(&inv) else { continue };
                        if let Some(piece) = pre.intersect(rp) {
                            if piece.measure() > 1e-9 * pre.measure() {
                                out.push(piece);
                            }
                        }
                    }
                }
            }
            _ => {
                // monotone interval branch
                let Polytope::Interval { lo: a0, hi: a1 } = *rp else { continue };
                let (v0, v1) = (branch.apply(Point::new(a0, 0.0)).x, branch.apply(Point::new(a1, 0.0)).x);
                let (ilo, ihi) = (v0.min(v1), v0.max(v1));
                for q in target {
                    let Polytope::Interval { lo: u, hi: v } = *q else { continue };
                    let ks = translates_between(fam, Point::new(u, 0.0), Point::new(v, 0.0), Point::new(ilo, 0.0), Point::new(ihi, 0.0));
                    for k in ks {
                        let (s, t) = ((u + k.x).max(ilo), (v + k.x).min(ihi));
                        if t - s <= 1e-15 {
                            continue;
                        }
                        let (x0, x1) = (bisect(branch, s, a0, a1), bisect(branch, t, a0, a1));
                        if let Ok(piece) = Polytope::interval(x0.min(x1), x0.max(x1)) {
                            out.push(piece);
                        }
                    }
                }
            }
        }
    }
    out
}

fn sample_pieces(pieces: &[Polytope], n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let total: f64 = pieces.iter().map(|p| p.measure()).sum();
    (0..n)
        .map(|_| {
            let mut pick = rng.random::<f64>() * total;
            for p in pieces {
                if pick < p.measure() {
                    return p.sample(rng);
                }
                pick -= p.measure();
            }
            pieces[pieces.len() - 1].sample(rng)
        })
        .collect()
}

/// C^n[ω_0..ω_{n-1}]: exact polytopes by successive preimages when the
/// branches allow it, otherwise `samples` rejection proposals in R_{ω_0}.
pub fn cylinder(fam: &MapFamily, word: &Word, samples: usize, seed: u64) -> Result<Cylinder> {
    if word.is_empty() {
        return Err(Error::BadParameter("cylinder needs a nonempty word".into()));
    }
    let w = word.symbols();
    if let Some(&s) = w.iter().find(|&&s| s >= fam.len()) {
        return Err(Error::SymbolOutOfRange { symbol: s, alphabet: fam.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol = fam.space().volume();
    let tractable = fam.is_affine() || fam.dim() == 1;
    if tractable {
        let mut pieces = fam.region(w[w.len() - 1]).polytopes.clone();
        for &l in w[..w.len() - 1].iter().rev() {
            pieces = pullback(fam, l, &pieces);
            if pieces.is_empty() {
                break;
            }
        }
        let empty = pieces.is_empty();
        let measure = pieces.iter().map(|p| p.measure()).sum::<f64>() / vol;
        let pts = if empty { Vec::new() } else { sample_pieces(&pieces, samples, &mut rng) };
        let provenance = if fam.is_affine() { Provenance::Exact } else { Provenance::Numeric { tolerance: 1e-15 } };
        return Ok(Cylinder {
            word: word.clone(),
            pieces: Some(pieces),
            samples: pts,
            empty,
            measure,
            provenance,
            proposals: 0,
        });
    }
    let r0 = fam.region(w[0]);
    let mut accepted = Vec::new();
    let mut proposals = 0;
    let budget = samples.max(1);
    while proposals < budget || (accepted.is_empty() && proposals < EMPTY_PROPOSALS) {
        let x = r0.sample(&mut rng);
        proposals += 1;
        if in_cylinder(fam, w, x, REPLAY_TOL) && accepted.len() < samples {
            accepted.push(x);
        }
    }
    let hits = accepted.len() as f64;
    // rule of three when nothing was accepted
    let measure = r0.measure() / vol * if accepted.is_empty() { 3.0 } else { hits } / proposals as f64;
    Ok(Cylinder {
        word: word.clone(),
        pieces: None,
        empty: accepted.is_empty(),
        samples: accepted,
        measure,
        provenance: Provenance::Sampled { n: proposals, tolerance: REPLAY_TOL },
        proposals,
    })
}

fn log_terms(fam: &MapFamily, word: &[usize], x: Point) -> Vec<f64> {
    let pts = local_orbit(fam, word, x);
    word.iter().zip(&pts).map(|(&w, &y)| -fam.maps[w].branch.jacobian(y).min_singular().ln()).collect()
}

fn witness(p: Point, dim: usize) -> Vec<f64> {
    if dim == 1 {
        vec![p.x]
    } else {
        vec![p.x, p.y]
    }
}

/// Is n = |word| a hyperbolic time at level c throughout the cylinder?
pub fn is_hyperbolic_cylinder(fam: &MapFamily, cyl: &Cylinder, c: f64) -> Result<TriState> {
    if cyl.empty {
        return Err(Error::BadParameter("cylinder is empty".into()));
    }
    let w = cyl.word.symbols();
    let n = w.len();
    if fam.is_affine() {
        let a: Vec<f64> = w.iter().map(|&s| -fam.maps[s].branch.jacobian(Point::zeros()).min_singular().ln()).collect();
        if pliss_times(&a, c).times.last() == Some(&n) {
            return Ok(TriState::Yes);
        }
        let x = cyl.samples.first().copied().unwrap_or_else(|| cyl.pieces.as_ref().unwrap()[0].centroid());
        return Ok(TriState::No { witness: witness(x, fam.dim()) });
    }
    for &x in &cyl.samples {
        if pliss_times(&log_terms(fam, w, x), c).times.last() != Some(&n) {
            return Ok(TriState::No { witness: witness(x, fam.dim()) });
        }
    }
    Ok(TriState::Unknown { samples: cyl.samples.len() })
}

#[derive(Clone, Debug, Serialize)]
pub struct K2Report {
    pub k1: f64,
    pub max_norm: f64,
    pub k2: f64,
    pub exact: bool,
}

/// K₂ = K₁ · max_i sup_{R_i} ‖Df_i‖ with K₁ the largest inner diameter of a region closure.
pub fn k2_bound(fam: &MapFamily, samples: usize, seed: u64) -> Result<K2Report> {
    let mut k1: f64 = 0.0;
    let mut exact = fam.is_affine();
    for r in &fam.partition.regions {
        let (d, ex) = closure_inner_diameter(r, fam.space())?;
        k1 = k1.max(d);
        exact &= ex;
    }
    let max_norm = estimate_sigmas(fam, samples, seed).max_norm.into_iter().fold(0.0, f64::max);
    Ok(K2Report { k1, max_norm, k2: k1 * max_norm, exact })
}

/// L₁ = exp(C₀ K₂^α Σ_{i≥0} e^{-icα/2}), summed in closed form.
pub fn l1_bound(c0: f64, alpha: f64, k2: f64, c: f64) -> Result<f64> {
    if !(c > 0.0 && alpha > 0.0) {
        return Err(Error::BadConstants(format!("need c > 0 and alpha > 0, got c = {c}, alpha = {alpha}")));
    }
    Ok((c0 * k2.powf(alpha) / (1.0 - (-c * alpha / 2.0).exp())).exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub j: usize,
    pub diameter: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub word: Word,
    pub c: f64,
    pub k2: f64,
    pub rows: Vec<DecayRow>,
    pub pass: bool,
    pub provenance: Provenance,
}

/// f^m_ω applied to the closure pieces of a cylinder, in the cover.
pub fn forward_image(fam: &MapFamily, cyl: &Cylinder, m: usize) -> Option<Vec<Polytope>> {
    push_pieces(fam, cyl.word.symbols(), cyl.pieces.as_ref()?, m.min(cyl.word.len()))
}

fn push_pieces(fam: &MapFamily, word: &[usize], pieces: &[Polytope], m: usize) -> Option<Vec<Polytope>> {
    let mut cur = pieces.to_vec();
    for &w in &word[..m] {
        let b = &fam.maps[w].branch;
        cur = cur
            .iter()
            .map(|p| match (b, p) {
                (Branch::Affine(a), _) => p.image(a),
                (_, Polytope::Interval { lo, hi }) => {
                    let (u, v) = (b.apply(Point::new(*lo, 0.0)).x, b.apply(Point::new(*hi, 0.0)).x);
                    Polytope::interval(u.min(v), u.max(v)).ok()
                }
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
    }
    Some(cur)
}

fn pieces_diameter(fam: &MapFamily, pieces: &[Polytope]) -> (f64, bool) {
    if pieces.len() == 1 && !(fam.dim() == 1 && fam.space().is_torus()) {
        return (pieces[0].diameter(), true);
    }
    if fam.dim() == 1 {
        // connected union of intervals in the cover: its span
        let mut iv: Vec<(f64, f64)> = pieces.iter().map(|p| (p.bbox().0.x, p.bbox().1.x)).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut reach = iv[0].1;
        for &(a, b) in &iv[1..] {
            if a > reach + 1e-12 {
                return (f64::INFINITY, true);
            }
            reach = reach.max(b);
        }
        // an image wrapping the whole circle has the circle's inner diameter
        let span = reach - iv[0].0;
        return (if fam.space().is_torus() && span >= 1.0 - 1e-12 { 0.5 } else { span }, true);
    }
    let region = Region { polytopes: pieces.to_vec() };
    closure_inner_diameter(&region, fam.space()).unwrap_or((f64::INFINITY, false))
}

/// Inner diameter of f^{n-j}(C̄^n) against K₂ e^{-jc/2} for j = 0..n.
pub fn diameter_decay_check(fam: &MapFamily, cyl: &Cylinder, c: f64, k2: f64) -> Result<DecayReport> {
    if matches!(is_hyperbolic_cylinder(fam, cyl, c)?, TriState::No { .. }) {
        return Err(Error::NotHyperbolic);
    }
    let w = cyl.word.symbols();
    let n = w.len();
    let mut rows = Vec::with_capacity(n + 1);
    let mut all_exact = true;
    for j in 0..=n {
        let m = n - j;
        let (diameter, exact) = match cyl.pieces.as_ref().and_then(|p| push_pieces(fam, w, p, m)) {
            Some(img) => pieces_diameter(fam, &img),
            None => {
                let pts: Vec<Point> = cyl
                    .samples
                    .iter()
                    .map(|&x| {
                        let mut y = x;
                        for &s in &w[..m] {
                            y = fam.local(s, y);
                        }
                        y
                    })
                    .collect();
                let mut d: f64 = 0.0;
                for a in &pts {
                    for b in &pts {
                        d = d.max((a - b).norm());
                    }
                }
                (d, false)
            }
        };
        all_exact &= exact;
        let bound = k2 * (-(j as f64) * c / 2.0).exp();
        rows.push(DecayRow { j, diameter, bound, ok: diameter <= bound + 1e-9 });
    }
    Ok(DecayReport {
        word: cyl.word.clone(),
        c,
        k2,
        pass: rows.iter().all(|r| r.ok),
        rows,
        provenance: if all_exact { cyl.provenance } else { Provenance::Sampled { n: cyl.samples.len(), tolerance: 0.0 } },
    })
}

/// |det Df^n_ω(x)| / |det Df^n_ω(y)| along the word.
pub fn distortion_ratio(fam: &MapFamily, word: &Word, x: Point, y: Point) -> Result<f64> {
    let w = word.symbols();
    if !in_cylinder(fam, w, x, 1e-9) || !in_cylinder(fam, w, y, 1e-9) {
        return Err(Error::OutsideCylinder);
    }
    let log_det = |p: Point| -> f64 {
        local_orbit(fam, w, p).iter().zip(w).map(|(&z, &s)| fam.maps[s].branch.jacobian(z).det().abs().ln()).sum()
    };
    Ok((log_det(x) - log_det(y)).exp())
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureRatioReport {
    pub samples: usize,
    pub measure_ratio: f64,
    pub image_ratio: f64,
    /// image_ratio / measure_ratio; must lie in [1/L₂, L₂] up to tolerance.
    pub normalized: f64,
    pub l2: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Monte Carlo check of m(f^n A₁)/m(f^n A₂) against m(A₁)/m(A₂), by change
/// of variables over uniform samples of the cylinder.
pub fn measure_ratio_check(
    fam: &MapFamily,
    cyl: &Cylinder,
    a1: &Region,
    a2: &Region,
    l2: f64,
    samples: usize,
    seed: u64,
) -> Result<MeasureRatioReport> {
    let Some(pieces) = cyl.pieces.as_ref().filter(|p| !p.is_empty()) else {
        return Err(Error::DegenerateSet);
    };
    let w = cyl.word.symbols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sample_pieces(pieces, samples, &mut rng);
    let (mut n1, mut n2, mut s1, mut s2) = (0usize, 0usize, 0.0, 0.0);
    for x in pts {
        let jac: f64 = local_orbit(fam, w, x).iter().zip(w).map(|(&z, &s)| fam.maps[s].branch.jacobian(z).det().abs()).product();
        if a1.contains(x, 0.0) {
            n1 += 1;
            s1 += jac;
        }
        if a2.contains(x, 0.0) {
            n2 += 1;
            s2 += jac;
        }
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::DegenerateSet);
    }
    let measure_ratio = n1 as f64 / n2 as f64;
    let image_ratio = s1 / s2;
    let normalized = (s1 / n1 as f64) / (s2 / n2 as f64);
    let tolerance = 3.0 / (samples as f64).sqrt();
    Ok(MeasureRatioReport {
        samples,
        measure_ratio,
        image_ratio,
        normalized,
        l2,
        tolerance,
        pass: normalized >= (1.0 - tolerance) / l2 && normalized <= l2 * (1.0 + tolerance),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BallReport {
    pub n: usize,
    pub r: f64,
    pub c: f64,
    pub samples: usize,
    /// Samples whose pullback left the domain of an inverse branch.
    pub escapes: usize,
    /// Largest dist(z_j, y_j) / r over tracked samples and steps.
    pub max_distance_ratio: f64,
    pub membership_violations: usize,
    pub contraction_violations: usize,
    pub eq5_violations: usize,
    /// Largest dist(z_0, x): the radius of the pulled-back ball.
    pub pullback_radius: f64,
    pub pass: bool,
}

fn ball_offset(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Point {
    if dim == 1 {
        return Point::new(r * (2.0 * rng.random::<f64>() - 1.0), 0.0);
    }
    let rho = r * rng.random::<f64>().sqrt();
    let th = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    Point::new(rho * th.cos(), rho * th.sin())
}

/// Samples B(f^n_ω(x), r), pulls each sample back along the inverse branches
/// and checks ball membership, backward contraction e^{-jc/2} and the
/// derivative comparison at the pulled-back start.
#[allow(clippy::too_many_arguments)]
pub fn dynamical_ball_check(
    fam: &MapFamily,
    x: Point,
    s: &SymbolStream,
    n: usize,
    r: f64,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<BallReport> {
    let rec = iterate(fam, x, s, n)?;
    if n == 0 || pliss_times(&rec.a, c).times.last() != Some(&n) {
        return Err(Error::NotHyperbolicTime(n));
    }
    let w = rec.symbols.symbols().to_vec();
    let y = &rec.points;
    let space = fam.space();
    let dim = fam.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_norm0 = 1.0 / fam.maps[w[0]].branch.jacobian(x).min_singular();
    let mut rep = BallReport {
        n,
        r,
        c,
        samples,
        escapes: 0,
        max_distance_ratio: 0.0,
        membership_violations: 0,
        contraction_violations: 0,
        eq5_violations: 0,
        pullback_radius: 0.0,
        pass: false,
    };
    let mut drawn = 0;
    let mut attempts = 0;
    while drawn < samples && attempts < 100 * samples.max(1) {
        attempts += 1;
        let z_n = space.wrap(y[n] + ball_offset(&mut rng, dim, r));
        if !space.contains(z_n, 0.0) {
            continue;
        }
        drawn += 1;
        let mut z = z_n;
        let mut g = Linear::identity(dim);
        let mut escaped = false;
        let mut worst: f64 = space.distance(z, y[n]) / r;
        let mut contraction_bad = false;
        for j in (0..n).rev() {
            let b = &fam.maps[w[j]].branch;
            let image = b.apply(y[j]);
            let target = image + space.displacement(space.wrap(image), z);
            let guess = b.affine_part().linear.inverse().map(|inv| y[j] + inv.apply(target - image));
            let Some(zj) = b.solve(target, guess) else {
                escaped = true;
                break;
            };
            if !region_contains(&fam.partition, w[j], zj, 1e-12) {
                escaped = true;
                break;
            }
            let inv = b.jacobian(zj).inverse().expect("invertible branch");
            g = inv.compose(&g);
            let k = n - j;
            if g.norm() > (-(k as f64) * c / 2.0).exp() * (1.0 + 1e-12) {
                contraction_bad = true;
            }
            worst = worst.max(space.distance(zj, y[j]) / r);
            z = zj;
        }
        if escaped {
            rep.escapes += 1;
            continue;
        }
        rep.max_distance_ratio = rep.max_distance_ratio.max(worst);
        if worst > 1.0 + 1e-12 {
            rep.membership_violations += 1;
        }
        if contraction_bad {
            rep.contraction_violations += 1;
        }
        let inv_norm = 1.0 / fam.maps[w[0]].branch.jacobian(z).min_singular();
        if inv_norm > (c / 2.0).exp() * inv_norm0 * (1.0 + 1e-12) {
            rep.eq5_violations += 1;
        }
        rep.pullback_radius = rep.pullback_radius.max(space.distance(z, x));
    }
    rep.samples = drawn;
    rep.pass = rep.escapes == 0
        && rep.membership_violations == 0
        && rep.contraction_violations == 0
        && rep.eq5_violations == 0;
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct RadiusReport {
    pub r: f64,
    pub configurations: usize,
    /// (radius, passed) on the dyadic grid 2^0 .. 2^-20.
    pub grid: Vec<(f64, bool)>,
}

/// Largest dyadic r such that ‖Df_{ω_0}(y)^{-1}‖ ≤ e^{c/2}‖Df_{ω_0}(x)^{-1}‖
/// for sampled y in B(x, r e^{-nc/2}) at sampled hyperbolic configurations.
pub fn estimate_r(fam: &MapFamily, c: f64, configs: usize, seed: u64) -> Result<RadiusReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<(Point, usize, usize)> = Vec::new();
    let mut attempts = 0;
    while found.len() < configs && attempts < 20 * configs.max(1) {
        attempts += 1;
        let x = fam.space().sample(&mut rng);
        let Ok(word) = itinerary(fam, x, 40) else { continue };
        let a = log_terms(fam, word.symbols(), x);
        if let Some(&n) = pliss_times(&a, c).times.last() {
            found.push((x, n, word.symbols()[0]));
        }
    }
    let dim = fam.dim();
    let space = fam.space();
    let grid: Vec<(f64, bool)> = (0..=20)
        .into_par_iter()
        .map(|e| {
            let r = 0.5f64.powi(e);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (e as u64 + 1));
            let ok = found.iter().all(|&(x, n, s0)| {
                let b = &fam.maps[s0].branch;
                let base = 1.0 / b.jacobian(x).min_singular();
                (0..8).all(|_| {
                    let yv = x + ball_offset(&mut rng, dim, r * (-(n as f64) * c / 2.0).exp());
                    !space.contains(space.wrap(yv), 0.0)
                        || 1.0 / b.jacobian(yv).min_singular() <= (c / 2.0).exp() * base * (1.0 + 1e-12)
                })
            });
            (r, ok)
        })
        .collect();
    let r = grid.iter().find(|(_, ok)| *ok).map_or(0.0, |(r, _)| *r);
    Ok(RadiusReport { r, configurations: found.len(), grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point1;
    use crate::systems::{doubling, identity_family, perturbed_doubling};
    use std::f64::consts::{E, LN_2};

    fn word(s: &[usize]) -> Word {
        Word::new(s.to_vec(), 2).unwrap()
    }

    fn interval(c: &Cylinder) -> (f64, f64) {
        let p = c.pieces.as_ref().unwrap();
        assert_eq!(p.len(), 1);
        let (a, b) = p[0].bbox();
        (a.x, b.x)
    }

    #[test]
    fn doubling_cylinders() {
        let f = doubling();
        assert_eq!(interval(&cylinder(&f, &word(&[0, 1]), 10, 0).unwrap()), (0.25, 0.5));
        assert_eq!(interval(&cylinder(&f, &word(&[0, 0, 0]), 10, 0).unwrap()), (0.0, 0.125));
        let c = cylinder(&f, &word(&[1, 0, 1]), 100, 0).unwrap();
        assert!(c.samples.iter().all(|&x| in_cylinder(&f, &[1, 0, 1], x, REPLAY_TOL)));
    }

    #[test]
    fn doubling_constants() {
        let k = k2_bound(&doubling(), 10, 0).unwrap();
        assert_eq!((k.k1, k.max_norm, k.k2), (0.5, 2.0, 1.0));
        assert!(k.exact);
        let id = k2_bound(&identity_family(), 10, 0).unwrap();
        assert_eq!(id.k2, id.k1);
        assert_eq!(l1_bound(0.0, 1.0, 1.0, 0.3).unwrap(), 1.0);
        assert!((l1_bound(1.0, 1.0, 1.0, 2.0 * LN_2).unwrap() - E * E).abs() < 1e-12);
        assert_eq!(l1_bound(1.0, 1.0, 1.0, 0.0).unwrap_err().code(), "bad-constants");
    }

    #[test]
    fn doubling_decay() {
        let f = doubling();
        let c = LN_2 * (1.0 - 1e-3);
        let cyl = cylinder(&f, &word(&[0, 1, 1, 0, 1]), 10, 0).unwrap();
        let rep = diameter_decay_check(&f, &cyl, c, 1.0).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.rows[0].diameter, 0.5);
        assert_eq!(rep.rows[1].diameter, 0.5);
        assert_eq!(rep.rows[5].diameter, 1.0 / 32.0);
    }

    #[test]
    fn distortion_affine_and_perturbed() {
        let f = doubling();
        let w = word(&[0, 1, 1]);
        assert_eq!(distortion_ratio(&f, &w, point1(0.4), point1(0.45)).unwrap(), 1.0);
        assert_eq!(distortion_ratio(&f, &w, point1(0.7), point1(0.19)).unwrap_err().code(), "outside-cylinder");
        let g = perturbed_doubling(0.01).unwrap();
        let cyl = cylinder(&g, &w, 50, 1).unwrap();
        for (a, b) in cyl.samples.iter().zip(cyl.samples.iter().rev()) {
            let r = distortion_ratio(&g, &w, *a, *b).unwrap();
            let back = distortion_ratio(&g, &w, *b, *a).unwrap();
            assert!((r * back - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn ball_check_doubling() {
        let f = doubling();
        let s = SymbolStream::iid(0, 2).unwrap();
        let x = point1(0.3);
        let w = itinerary(&f, x, 5).unwrap();
        let s_it = SymbolStream::periodic(&w).unwrap();
        let rep = dynamical_ball_check(&f, x, &s_it, 5, 0.1, LN_2, 200, 1).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.pullback_radius - 0.1 / 32.0).abs() < 1e-3 / 32.0);
        let big = dynamical_ball_check(&f, x, &s_it, 5, 0.45, LN_2, 200, 1).unwrap();
        assert!(big.escapes > 0);
        let _ = s;
    }
}
