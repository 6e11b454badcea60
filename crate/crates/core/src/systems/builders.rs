use super::family::{extend_map, Branch, MapFamily};
use crate::conditions::default_constants;
use crate::error::{Error, Result};
use crate::geometry::{
    affine_onto_exact, barycenter, permutations, qvalue, validate_triangulation, AffineMap, Partition,
    PhaseSpace, QAffine, QPoint, Region, Simplex, Q,
};

fn qverts(s: &Simplex) -> Vec<QPoint> {
    s.vertices().iter().map(|v| QPoint::from_point(*v)).collect()
}

/// `piece` reordered by the vertex correspondence onto `whole` whose map has
/// the largest smallest singular value; ties go to orientation-preserving
/// maps, then to the first permutation in lexicographic order.
fn best_order(dim: usize, piece: &[QPoint], whole: &[QPoint]) -> Result<(Vec<QPoint>, QAffine)> {
    let mut best: Option<(f64, bool, Vec<QPoint>, QAffine)> = None;
    for perm in permutations(dim + 1) {
        let sub: Vec<QPoint> = perm.iter().map(|&i| piece[i].clone()).collect();
        let a = affine_onto_exact(dim, &sub, whole).ok_or(Error::DegenerateSimplex { volume: 0.0 })?;
        let s = a.to_affine().linear.min_singular();
        let pos = a.det() > Q::from_integer(0.into());
        let better = match &best {
            None => true,
            Some((bs, bpos, ..)) => {
                if (s - bs).abs() <= 1e-12 * bs {
                    pos && !bpos
                } else {
                    s > *bs
                }
            }
        };
        if better {
            best = Some((s, pos, sub, a));
        }
    }
    let (_, _, sub, a) = best.expect("at least one permutation");
    Ok((sub, a))
}

/// Affine map from `piece` onto `whole` chosen as in [`best_order`], computed
/// in exact arithmetic.
pub fn best_correspondence(piece: &Simplex, whole: &Simplex) -> Result<AffineMap> {
    if piece.dim() != whole.dim() {
        return Err(Error::DimensionMismatch { expected: whole.dim(), got: piece.dim() });
    }
    Ok(best_order(piece.dim(), &qverts(piece), &qverts(whole))?.1.to_affine())
}

fn exact_subdivision(dim: usize, v: &[QPoint]) -> Vec<Vec<QPoint>> {
    permutations(dim + 1)
        .into_iter()
        .map(|perm| (0..=dim).map(|i| barycenter(&perm[..=i].iter().map(|&j| v[j].clone()).collect::<Vec<_>>())).collect())
        .collect()
}

/// Ordered pieces: vertex i of each piece goes to vertex i of `s`.
fn exact_pieces(dim: usize, s: &[QPoint], depth: usize) -> Result<Vec<Vec<QPoint>>> {
    if depth == 0 {
        return Ok(vec![s.to_vec()]);
    }
    let inner = exact_pieces(dim, s, depth - 1)?;
    let mut out = Vec::new();
    for piece in exact_subdivision(dim, s) {
        let (_, a) = best_order(dim, &piece, s)?;
        let back = a.inverse().ok_or(Error::DegenerateSimplex { volume: 0.0 })?;
        for q in &inner {
            out.push(q.iter().map(|v| back.apply(v)).collect());
        }
    }
    Ok(out)
}

/// Pieces of the `depth`-fold barycentric subdivision of `s`, each with an
/// affine map onto `s`. Vertices and maps are exact up to one final rounding.
pub fn subdivision_pieces(s: &Simplex, depth: usize) -> Result<Vec<(Simplex, AffineMap)>> {
    let dim = s.dim();
    let whole = qverts(s);
    exact_pieces(dim, &whole, depth)?
        .into_iter()
        .map(|p| {
            let a = affine_onto_exact(dim, &p, &whole).ok_or(Error::DegenerateSimplex { volume: 0.0 })?;
            Ok((Simplex::new(p.iter().map(QPoint::to_point).collect())?, a.to_affine()))
        })
        .collect()
}

fn check_triangulation(space: &PhaseSpace, t: &[Simplex]) -> Result<()> {
    if let Some(s) = t.iter().find(|s| s.dim() != space.dim()) {
        return Err(Error::DimensionMismatch { expected: space.dim(), got: s.dim() });
    }
    validate_triangulation(t, Some(space.volume()))?;
    let (lo, hi) = space.bbox();
    let inside = t.iter().flat_map(|s| s.vertices()).all(|v| {
        (0..space.dim()).all(|c| v[c] >= lo[c] - 1e-12 && v[c] <= hi[c] + 1e-12) && space.contains(*v, 1e-12)
    });
    if !inside {
        return Err(Error::BadTriangulation("simplices leave the space".into()));
    }
    Ok(())
}

fn assemble(name: &str, space: &PhaseSpace, pieces: Vec<(Simplex, AffineMap)>, p: usize) -> Result<MapFamily> {
    let regions = pieces.iter().map(|(s, _)| Region::from_simplex(s)).collect();
    let partition = Partition::new(space.clone(), regions)?;
    let maps = pieces
        .into_iter()
        .enumerate()
        .map(|(i, (_, a))| extend_map(&format!("f{}", i + 1), Branch::Affine(a), i, &partition))
        .collect::<Result<Vec<_>>>()?;
    MapFamily::new(name, partition, maps, p)
}

/// All pieces of the depth-d subdivision of every simplex, each mapped
/// affinely onto its simplex. Every generator is expanding (q = 0).
pub fn build_expanding_family(space: &PhaseSpace, t: &[Simplex], depth: usize) -> Result<MapFamily> {
    if depth == 0 {
        return Err(Error::BadParameter("subdivision depth must be at least 1".into()));
    }
    check_triangulation(space, t)?;
    let mut pieces = Vec::new();
    for s in t {
        pieces.extend(subdivision_pieces(s, depth)?);
    }
    let p = pieces.len();
    assemble(&format!("expanding-{}-d{depth}", space.name()), space, pieces, p)
}

/// Each triangle (w0, w1, w2) gets a distinguished piece (w0, w1, a) with apex
/// a = (1-β)·mid(w0, w1) + β·w2, sent onto the triangle by the map fixing w0
/// and w1 (|det| = 1/β). The two remaining triangles are subdivided
/// barycentrically into expanding pieces. Distinguished pieces come last.
pub fn build_mostly_expanding_family(space: &PhaseSpace, t: &[Simplex], beta: f64) -> Result<MapFamily> {
    if space.dim() != 2 {
        return Err(Error::BadParameter("the near-neutral builder needs a 2-dimensional space".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::BadParameter(format!("face fraction beta = {beta} must lie in (0,1)")));
    }
    check_triangulation(space, t)?;
    let mut expanding = Vec::new();
    let mut neutral = Vec::new();
    for s in t {
        let w = qverts(s);
        let apex = barycenter(&w[..2]).lerp(&w[2], &qvalue(beta));
        let distinguished = vec![w[0].clone(), w[1].clone(), apex.clone()];
        let a = affine_onto_exact(2, &distinguished, &w).ok_or(Error::DegenerateSimplex { volume: 0.0 })?;
        let tri = |v: &[QPoint]| Simplex::new(v.iter().map(QPoint::to_point).collect());
        neutral.push((tri(&distinguished)?, a.to_affine()));
        for side in [vec![w[0].clone(), apex.clone(), w[2].clone()], vec![apex.clone(), w[1].clone(), w[2].clone()]] {
            for piece in exact_subdivision(2, &side) {
                let (ordered, a) = best_order(2, &piece, &w)?;
                expanding.push((tri(&ordered)?, a.to_affine()));
            }
        }
    }
    let p = expanding.len();
    expanding.extend(neutral);
    let fam = assemble(&format!("mostly-expanding-{}-b{beta}", space.name()), space, expanding, p)?;
    let consts = default_constants(&fam)?;
    if consts.epsilon0.is_none() {
        return Err(Error::BadParameter(format!(
            "beta = {beta}: no epsilon0 in (0,1) for c = {} (sigma1 = {}, sigma2 = {})",
            consts.c, consts.sigma1, consts.sigma2
        )));
    }
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point1;

    #[test]
    fn circle_depth_one_is_doubling() {
        let space = PhaseSpace::torus(1).unwrap();
        let f = build_expanding_family(&space, &[Simplex::standard(1)], 1).unwrap();
        assert_eq!(f.len(), 2);
        let a0 = f.maps[0].branch.as_affine().unwrap();
        let a1 = f.maps[1].branch.as_affine().unwrap();
        assert_eq!((a0.linear.det(), a0.offset.x), (2.0, 0.0));
        assert_eq!((a1.linear.det(), a1.offset.x), (2.0, -1.0));
        assert_eq!(f.apply(1, point1(0.3)), point1(0.6));
    }

    #[test]
    fn circle_depth_two_has_four_times_four() {
        let space = PhaseSpace::torus(1).unwrap();
        let f = build_expanding_family(&space, &[Simplex::standard(1)], 2).unwrap();
        assert_eq!(f.len(), 4);
        for m in &f.maps {
            assert_eq!(m.branch.as_affine().unwrap().linear.det().abs(), 4.0);
        }
    }

    #[test]
    fn triangle_pieces_have_det_six() {
        let space = PhaseSpace::standard_triangle();
        let f = build_expanding_family(&space, &space.simplices(), 1).unwrap();
        assert_eq!(f.len(), 6);
        for m in &f.maps {
            assert_eq!(m.branch.as_affine().unwrap().linear.det().abs(), 6.0);
        }
    }

    #[test]
    fn bad_beta_rejected() {
        let space = PhaseSpace::standard_triangle();
        for b in [0.0, 1.0, -0.5, f64::NAN] {
            let e = build_mostly_expanding_family(&space, &space.simplices(), b).unwrap_err();
            assert_eq!(e.code(), "bad-parameter");
        }
        let t1 = PhaseSpace::torus(1).unwrap();
        assert!(build_mostly_expanding_family(&t1, &t1.simplices(), 0.5).is_err());
    }

    #[test]
    fn overlapping_triangulation_rejected() {
        let space = PhaseSpace::torus(1).unwrap();
        let half = Simplex::new(vec![point1(0.0), point1(0.6)]).unwrap();
        let e = build_expanding_family(&space, &[Simplex::standard(1), half], 1).unwrap_err();
        assert_eq!(e.code(), "bad-triangulation");
    }
}
