//! Ready-made families used by the tests, the CLI and the acceptance suite.

use super::builders::{build_expanding_family, build_mostly_expanding_family};
use super::family::{extend_map, Branch, Extension, MapFamily};
use crate::error::Result;
use crate::geometry::{point1, AffineMap, Linear, Partition, PhaseSpace, Point, Polytope, Region};
use nalgebra::Matrix2;

fn affine1(a: f64, b: f64) -> Branch {
    Branch::Affine(AffineMap::new(Linear::scalar(1, a), point1(b)))
}

fn circle_partition(cuts: &[f64]) -> Partition {
    let regions = cuts.windows(2).map(|w| Region::interval(w[0], w[1]).expect("interval")).collect();
    Partition::new(PhaseSpace::torus(1).expect("circle"), regions).expect("partition")
}

fn family(name: &str, partition: Partition, branches: Vec<Branch>, p: usize) -> Result<MapFamily> {
    let maps = branches
        .into_iter()
        .enumerate()
        .map(|(i, b)| extend_map(&format!("f{}", i + 1), b, i, &partition))
        .collect::<Result<Vec<_>>>()?;
    MapFamily::new(name, partition, maps, p)
}

/// x ↦ 2x on (0,½) and 2x - 1 on (½,1).
pub fn doubling() -> MapFamily {
    let space = PhaseSpace::torus(1).expect("circle");
    let mut f = build_expanding_family(&space, &space.simplices(), 1).expect("doubling builds");
    f.name = "doubling".into();
    f
}

/// Doubling plus `amplitude·sin(2πx)` on both branches (still full-branch).
pub fn perturbed_doubling(amplitude: f64) -> Result<MapFamily> {
    let sine = |b: f64| Branch::Sine {
        affine: AffineMap::new(Linear::scalar(1, 2.0), point1(b)),
        amplitude,
        axis: 0,
    };
    family("perturbed-doubling", circle_partition(&[0.0, 0.5, 1.0]), vec![sine(0.0), sine(-1.0)], 2)
}

pub fn triangle_expanding(depth: usize) -> Result<MapFamily> {
    let space = PhaseSpace::standard_triangle();
    build_expanding_family(&space, &space.simplices(), depth)
}

pub fn triangle_mostly_expanding(beta: f64) -> Result<MapFamily> {
    let space = PhaseSpace::standard_triangle();
    build_mostly_expanding_family(&space, &space.simplices(), beta)
}

/// Non-ergodic control: every generator is the map doubling each half of the
/// circle onto itself, so both halves are invariant. Markov still holds.
pub fn two_arc_control() -> MapFamily {
    let branches = vec![affine1(2.0, 0.0), affine1(2.0, -0.5), affine1(2.0, -0.5), affine1(2.0, -1.0)];
    family("two-arc-control", circle_partition(&[0.0, 0.25, 0.5, 0.75, 1.0]), branches, 4)
        .expect("control builds")
        .with_extension(Extension::ChartWise)
}

/// Isometric control: rotations by ¼ and ½ (declared expanding, which fails).
pub fn rational_rotations() -> MapFamily {
    family("rational-rotations", circle_partition(&[0.0, 0.5, 1.0]), vec![affine1(1.0, 0.25), affine1(1.0, 0.5)], 2)
        .expect("rotations build")
}

/// Doubling on (0,½) and the identity as a volume-preserving neutral member.
pub fn identity_det_one() -> MapFamily {
    family("identity-det1", circle_partition(&[0.0, 0.5, 1.0]), vec![affine1(2.0, 0.0), affine1(1.0, 0.0)], 1)
        .expect("family builds")
}

/// Two identity maps; every point is fixed by every generator.
pub fn identity_family() -> MapFamily {
    family("identity", circle_partition(&[0.0, 0.5, 1.0]), vec![affine1(1.0, 0.0), affine1(1.0, 0.0)], 2)
        .expect("family builds")
}

/// Inverse branches of doubling, x/2 and (x+1)/2.
pub fn doubling_inverse() -> MapFamily {
    family("doubling-inverse", circle_partition(&[0.0, 0.5, 1.0]), vec![affine1(0.5, 0.0), affine1(0.5, 0.5)], 0)
        .expect("family builds")
}

/// 2x mod 1 on the four quadrants of the flat 2-torus.
pub fn doubling_torus2() -> MapFamily {
    let space = PhaseSpace::torus(2).expect("torus");
    let mut regions = Vec::new();
    let mut branches = Vec::new();
    for (i, j) in [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)] {
        let sq = Polytope::polygon(vec![
            Point::new(i, j),
            Point::new(i + 0.5, j),
            Point::new(i + 0.5, j + 0.5),
            Point::new(i, j + 0.5),
        ])
        .expect("square");
        regions.push(Region::new(vec![sq]).expect("region"));
        let lin = Linear::new(2, Matrix2::new(2.0, 0.0, 0.0, 2.0));
        branches.push(Branch::Affine(AffineMap::new(lin, Point::new(-2.0 * i, -2.0 * j))));
    }
    let partition = Partition::new(space, regions).expect("partition");
    family("doubling-torus2", partition, branches, 4).expect("family builds")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_generators_agree_everywhere() {
        let f = two_arc_control();
        for x in [0.1, 0.3, 0.6, 0.9] {
            let y = f.apply(0, point1(x));
            for i in 1..4 {
                assert_eq!(f.apply(i, point1(x)), y);
            }
            assert_eq!(x < 0.5, y.x < 0.5);
        }
    }

    #[test]
    fn doubling_preimages() {
        let f = doubling();
        let mut pre: Vec<f64> = f.preimages(0, point1(0.5)).iter().map(|p| p.x).collect();
        pre.sort_by(f64::total_cmp);
        assert_eq!(pre, vec![0.25, 0.75]);
        let mut zero: Vec<f64> = f.preimages(1, point1(0.0)).iter().map(|p| p.x).collect();
        zero.sort_by(f64::total_cmp);
        assert_eq!(zero, vec![0.0, 0.5]);
    }

    #[test]
    fn perturbed_preimage_round_trip() {
        let f = perturbed_doubling(0.01).unwrap();
        for y in [0.05, 0.4, 0.77] {
            let pre = f.preimages(0, point1(y));
            assert_eq!(pre.len(), 2);
            for x in pre {
                assert!(f.space().distance(f.apply(0, x), point1(y)) < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        for f in [doubling(), two_arc_control(), perturbed_doubling(0.01).unwrap(), triangle_expanding(1).unwrap()] {
            let back = MapFamily::from_json(&f.to_json()).unwrap();
            assert_eq!(back, f);
        }
    }
}
