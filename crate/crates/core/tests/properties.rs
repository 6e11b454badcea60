use std::f64::consts::LN_2;
use std::sync::Arc;

use ergolab_core::conditions::{check_markov, constants_sheet, estimate_sigmas, Overrides};
use ergolab_core::cylinders::{
    cylinder, distortion_ratio, forward_image, in_cylinder, is_hyperbolic_cylinder, k2_bound, measure_ratio_check, TriState,
    REPLAY_TOL,
};
use ergolab_core::ergodicity::invariant_set_probe;
use ergolab_core::expansion::{
    check_orbital_nue, expanding_fraction, hyperbolic_frequency, iterate, itinerary, pliss_bound, pliss_times,
    pliss_times_bruteforce,
};
use ergolab_core::geometry::{affine_onto, point1, Location, PhaseSpace, Point, Region, Simplex};
use ergolab_core::irreducibility::{eps_density, orbit_tree, weak_cycle_test, Direction, DEFAULT_BUDGET};
use ergolab_core::symbolic::{SymbolStream, Word};
use ergolab_core::systems::{
    build_expanding_family, doubling, perturbed_doubling, rational_rotations, triangle_expanding,
    triangle_mostly_expanding, MapFamily,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn families() -> Vec<MapFamily> {
    vec![
        doubling(),
        perturbed_doubling(1e-2).unwrap(),
        triangle_expanding(1).unwrap(),
        triangle_mostly_expanding(0.5).unwrap(),
    ]
}

fn interior(f: &MapFamily, rng: &mut ChaCha8Rng) -> Point {
    loop {
        let x = f.space().sample(rng);
        if matches!(f.locate(x), Location::Interior(_)) {
            return x;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prefix_of_shift_drops_first(word in prop::collection::vec(0usize..3, 1..8), seed in any::<u64>(), n in 0usize..20) {
        let w = Word::new(word, 3).unwrap();
        let f = Arc::new(doubling());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = interior(&f, &mut rng);
        let streams = [
            SymbolStream::periodic(&w).unwrap(),
            SymbolStream::iid(seed, 3).unwrap(),
            SymbolStream::itinerary(f.clone(), x),
        ];
        for s in streams {
            let long = s.prefix(n + 1).unwrap();
            prop_assert_eq!(long.drop_first(1), s.shift().prefix(n).unwrap());
        }
    }

    #[test]
    fn pliss_matches_bruteforce(a in prop::collection::vec(-3.0f64..2.0, 0..200), c in prop::sample::select(vec![0.1, 0.5, 1.0])) {
        prop_assert_eq!(pliss_times(&a, c), pliss_times_bruteforce(&a, c));
    }

    #[test]
    fn pliss_matches_bruteforce_with_ties(a in prop::collection::vec(-4i32..3, 0..200), c in 1i32..3) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        prop_assert_eq!(pliss_times(&a, c as f64), pliss_times_bruteforce(&a, c as f64));
    }

    #[test]
    fn hyperbolic_times_survive_shifts(a in prop::collection::vec(-3.0f64..2.0, 1..120), c in 0.1f64..1.0) {
        let h = pliss_times(&a, c);
        for &n in &h.times {
            for s in 1..n {
                prop_assert!(pliss_times(&a[s..], c).times.contains(&(n - s)));
            }
        }
    }

    #[test]
    fn pliss_density_bound(seed in any::<u64>(), len in 50usize..400, c in 0.1f64..1.0, big_a in 1.5f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..len).map(|_| rng.random_range(-big_a..2.0)).collect();
        // lower the sequence (keeping terms ≥ -A) until the average is ≤ -c
        let shifted = |d: f64| raw.iter().map(|x| (x - d).max(-big_a)).collect::<Vec<_>>();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mean(&shifted(mid)) <= -c { hi = mid } else { lo = mid }
        }
        let a = shifted(hi);
        prop_assume!(mean(&a) <= -c);
        let freq = hyperbolic_frequency(&pliss_times(&a, c / 2.0), a.len());
        prop_assert!(freq >= pliss_bound(c, big_a) - 1e-12, "{} < {}", freq, pliss_bound(c, big_a));
    }

    #[test]
    fn affine_onto_round_trip(pts in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 6)) {
        let p: Vec<Point> = pts.iter().map(|&(x, y)| Point::new(x, y)).collect();
        let (Ok(a), Ok(b)) = (Simplex::new(p[..3].to_vec()), Simplex::new(p[3..].to_vec())) else { return Ok(()) };
        prop_assume!(a.volume() > 1e-3 && b.volume() > 1e-3);
        let m = affine_onto(&a, &b).unwrap();
        let back = m.inverse().unwrap();
        for (u, v) in a.vertices().iter().zip(b.vertices()) {
            prop_assert!((m.apply(*u) - v).norm() < 1e-9);
            prop_assert!((back.apply(*v) - u).norm() < 1e-9);
        }
    }
}

#[test]
fn finite_difference_jacobians() {
    let h = 1e-6;
    for f in families() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = interior(&f, &mut rng);
            let Location::Interior(i) = f.locate(x) else { unreachable!() };
            let b = &f.maps[i].branch;
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let e = if f.dim() == 1 { point1(1.0) } else { Point::new(t.cos(), t.sin()) };
            let fd = (b.apply(x + e * h) - b.apply(x)) / h;
            assert!((fd - b.jacobian(x).apply(e)).norm() <= 1e-4, "{}", f.name);
            assert!(b.jacobian(x).det().abs() > 1e-10);
        }
    }
}

#[test]
fn itinerary_stream_matches_itinerary() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for f in families() {
        let src = Arc::new(f.clone());
        for _ in 0..20 {
            let x = interior(&f, &mut rng);
            let s = SymbolStream::itinerary(src.clone(), x);
            let w = itinerary(&f, x, 30).unwrap();
            assert_eq!(s.prefix(30).unwrap(), w);
            let rec = iterate(&f, x, &s, 30).unwrap();
            assert_eq!(rec.symbols, w);
            for (j, y) in rec.points.iter().enumerate().take(30) {
                assert!(f.partition.closures_containing(*y, 1e-12).contains(&w.symbols()[j]));
                let next = f.apply(w.symbols()[j], *y);
                assert!(f.space().distance(next, rec.points[j + 1]) < 1e-10);
            }
        }
    }
}

#[test]
fn built_families_are_markov_with_constant_determinants() {
    let t1 = PhaseSpace::torus(1).unwrap();
    let d2 = build_expanding_family(&t1, &t1.simplices(), 2).unwrap();
    assert_eq!(d2.len(), 4);
    assert_eq!(estimate_sigmas(&d2, 8, 0).sigma1, 4.0);
    for f in [doubling(), d2, triangle_expanding(1).unwrap(), triangle_expanding(2).unwrap(), triangle_mostly_expanding(0.5).unwrap()] {
        assert!(check_markov(&f, 0, 0).pass, "{}", f.name);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (i, m) in f.maps.iter().enumerate() {
            let dets: Vec<f64> = (0..50).map(|_| m.branch.jacobian(f.region(i).sample(&mut rng)).det().abs()).collect();
            let mean = dets.iter().sum::<f64>() / 50.0;
            assert!(dets.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / 50.0 < 1e-12);
        }
    }
}

#[test]
fn extended_maps_agree_with_branches() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for f in families() {
        for _ in 0..1000 {
            let x = interior(&f, &mut rng);
            let Location::Interior(i) = f.locate(x) else { unreachable!() };
            let space = f.space();
            assert_eq!(f.apply(i, x), space.wrap(f.maps[i].branch.apply(x)));
        }
    }
}

#[test]
fn q1_family_constants() {
    let f = triangle_mostly_expanding(0.5).unwrap();
    let neutral = f.maps.last().unwrap().branch.affine_part().linear;
    assert_eq!(neutral.det().abs(), 2.0);
    let s = neutral.min_singular();
    assert!(s < 1.05 && s > 0.5);
    let sheet = constants_sheet(&f, Overrides::default(), false, 0).unwrap();
    assert!(sheet.consistent);
    let e = sheet.epsilon0.unwrap().value;
    let (s1, s2, c) = (sheet.sigma1.value, sheet.sigma2.value, sheet.c.value);
    assert!(s1.powf(-e) * s2.powf(1.0 - e) <= (-c).exp() * (1.0 + 1e-12));
    let k = k2_bound(&f, 16, 0).unwrap();
    let oracle = f.maps.iter().map(|m| {
        let r = m.branch.affine_part().linear.rows();
        nalgebra::Matrix2::new(r[0][0], r[0][1], r[1][0], r[1][1]).singular_values().max()
    });
    assert!((k.max_norm - oracle.fold(0.0, f64::max)).abs() < 1e-12);
    let widest = f.partition.regions.iter().map(|r| {
        let v = r.vertices();
        v.iter().flat_map(|a| v.iter().map(move |b| (a - b).norm())).fold(0.0, f64::max)
    });
    assert!((k.k1 - widest.fold(0.0, f64::max)).abs() < 1e-12);
}

#[test]
fn nue_and_expanding_fraction_for_q1() {
    let f = triangle_mostly_expanding(0.5).unwrap();
    let sheet = constants_sheet(&f, Overrides::default(), false, 0).unwrap();
    let (c, e0) = (sheet.c.value, sheet.epsilon0.unwrap().value);
    let src = Arc::new(f.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut nue, mut frac_ok, mut min_frac) = (0, 0, 1.0f64);
    for _ in 0..1000 {
        let x = interior(&f, &mut rng);
        let rec = iterate(&f, x, &SymbolStream::itinerary(src.clone(), x), 10_000).unwrap();
        nue += usize::from(check_orbital_nue(&rec, c).pass);
        let fr = expanding_fraction(&rec, f.p);
        min_frac = min_frac.min(fr);
        frac_ok += usize::from(fr >= e0);
    }
    assert!(nue >= 990, "{nue}");
    assert!(frac_ok >= 990, "{frac_ok}, min {min_frac}");
}

#[test]
fn rotations_are_not_nue() {
    let f = rational_rotations();
    let s = SymbolStream::iid(1, 2).unwrap();
    let rec = iterate(&f, point1(0.1), &s, 1000).unwrap();
    let r = check_orbital_nue(&rec, 0.1);
    assert!(!r.pass && r.average.abs() < 1e-12);
}

#[test]
fn doubling_hyperbolic_frequency() {
    let f = doubling();
    let x = point1(0.1234);
    let rec = iterate(&f, x, &SymbolStream::itinerary(Arc::new(f.clone()), x), 1000).unwrap();
    assert_eq!(hyperbolic_frequency(&pliss_times(&rec.a, LN_2 / 2.0), 1000), 1.0);
}

#[test]
fn cylinders_replay_and_push_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for f in [doubling(), triangle_expanding(1).unwrap(), triangle_mostly_expanding(0.5).unwrap()] {
        for _ in 0..20 {
            let x = interior(&f, &mut rng);
            let n = rng.random_range(1..6);
            let w = itinerary(&f, x, n).unwrap();
            let cyl = cylinder(&f, &w, 200, 1).unwrap();
            assert!(!cyl.empty && in_cylinder(&f, w.symbols(), x, REPLAY_TOL));
            assert!(cyl.samples.iter().all(|&y| in_cylinder(&f, w.symbols(), y, REPLAY_TOL)));
            // the n-step image is the image of the last region
            let img = forward_image(&f, &cyl, n).unwrap();
            let last = w.symbols()[n - 1];
            let m: f64 = img.iter().map(|p| p.measure()).sum();
            let want = f.region(last).measure() * f.maps[last].branch.affine_part().linear.det().abs();
            assert!((m - want).abs() < 1e-9 * want, "{} vs {}", m, want);
        }
    }
}

#[test]
fn hyperbolic_cylinder_examples() {
    let f = doubling();
    let cyl = cylinder(&f, &Word::new(vec![1, 0, 0, 1], 2).unwrap(), 10, 0).unwrap();
    assert_eq!(is_hyperbolic_cylinder(&f, &cyl, LN_2).unwrap(), TriState::Yes);
    let q1 = triangle_mostly_expanding(0.5).unwrap();
    let neutral = q1.len() - 1;
    let cyl = cylinder(&q1, &Word::new(vec![neutral; 3], q1.len()).unwrap(), 10, 0).unwrap();
    assert!(matches!(is_hyperbolic_cylinder(&q1, &cyl, 0.1).unwrap(), TriState::No { .. }));
}

#[test]
fn distortion_reciprocity_and_measure_ratio() {
    let g = perturbed_doubling(1e-2).unwrap();
    let w = Word::new(vec![0, 0, 0], 2).unwrap();
    let cyl = cylinder(&g, &w, 400, 9).unwrap();
    for p in cyl.samples.chunks_exact(2) {
        let r = distortion_ratio(&g, &w, p[0], p[1]).unwrap() * distortion_ratio(&g, &w, p[1], p[0]).unwrap();
        assert!((r - 1.0).abs() < 1e-10);
        assert_eq!(distortion_ratio(&g, &w, p[0], p[0]).unwrap(), 1.0);
    }
    let sheet = constants_sheet(&g, Overrides::default(), false, 0).unwrap();
    let (lo, hi) = {
        let b = cyl.pieces.as_ref().unwrap()[0].bbox();
        (b.0.x, b.1.x)
    };
    let third = (hi - lo) / 3.0;
    let a1 = Region::interval(lo, lo + third).unwrap();
    let a2 = Region::interval(lo + 2.0 * third, hi).unwrap();
    let rep = measure_ratio_check(&g, &cyl, &a1, &a2, sheet.l2.value, 100_000, 1).unwrap();
    assert!(rep.pass, "{rep:?}");
    let f = doubling();
    let dcyl = cylinder(&f, &w, 10, 0).unwrap();
    let rep = measure_ratio_check(&f, &dcyl, &a1, &a1, 1.0, 10_000, 1).unwrap();
    assert!(rep.pass && rep.normalized == 1.0);
}

#[test]
fn backward_trees_are_dyadically_dense() {
    let f = doubling();
    for d in 1..=12 {
        let t = orbit_tree(&f, point1(0.37), Direction::Backward, d, DEFAULT_BUDGET);
        let eps = 2f64.powi(-(d as i32) + 1);
        assert_eq!(eps_density(f.space(), &t.nodes, eps, 2000, d as u64).coverage, 1.0, "depth {d}");
    }
}

#[test]
fn weak_cycle_monotone_in_depth() {
    let f = triangle_expanding(1).unwrap();
    let b = Region::from_simplex(&Simplex::new(vec![Point::new(0.6, 0.1), Point::new(0.7, 0.1), Point::new(0.6, 0.2)]).unwrap());
    let mut last = 0.0;
    for d in 0..5 {
        let r = weak_cycle_test(&f, &b, 200, d, 4);
        assert!(r.hit_fraction >= last);
        last = r.hit_fraction;
    }
}

#[test]
fn invariant_sets_are_closed() {
    for f in [triangle_expanding(1).unwrap(), rational_rotations()] {
        let r = invariant_set_probe(&f, 32, 1000).unwrap();
        assert!(r.sets.iter().all(|s| s.closed));
    }
}
