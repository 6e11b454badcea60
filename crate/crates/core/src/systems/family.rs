use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AffineMap, Linear, Location, Partition, PhaseSpace, Point, Region};

/// Per-step floating-point dither used by orbit iteration (2^-48).
pub const DEFAULT_DITHER: f64 = 3.552713678800501e-15;

/// The local formula of a generator on its region.
#[derive(Clone, Debug, PartialEq)]
pub enum Branch {
    Affine(AffineMap),
    /// `x ↦ Ax + b + amplitude·sin(2π x_axis)·e_axis`, a C² perturbation hook.
    Sine { affine: AffineMap, amplitude: f64, axis: usize },
}

impl Branch {
    pub fn affine_part(&self) -> &AffineMap {
        match self {
            Branch::Affine(a) | Branch::Sine { affine: a, .. } => a,
        }
    }

    pub fn as_affine(&self) -> Option<&AffineMap> {
        match self {
            Branch::Affine(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, Branch::Affine(_))
    }

    pub fn apply(&self, x: Point) -> Point {
        match self {
            Branch::Affine(a) => a.apply(x),
            Branch::Sine { affine, amplitude, axis } => {
                let mut y = affine.apply(x);
                y[*axis] += amplitude * (2.0 * PI * x[*axis]).sin();
                y
            }
        }
    }

    pub fn jacobian(&self, x: Point) -> Linear {
        match self {
            Branch::Affine(a) => a.linear,
            Branch::Sine { affine, amplitude, axis } => {
                let mut m = *affine.linear.matrix();
                m[(*axis, *axis)] += 2.0 * PI * amplitude * (2.0 * PI * x[*axis]).cos();
                Linear::new(affine.dim(), m)
            }
        }
    }

    /// Solve `apply(x) = y`, starting Newton from `guess` for nonlinear branches.
    pub fn solve(&self, y: Point, guess: Option<Point>) -> Option<Point> {
        let inv = self.affine_part().inverse()?;
        match self {
            Branch::Affine(_) => Some(inv.apply(y)),
            Branch::Sine { .. } => {
                let mut x = guess.unwrap_or_else(|| inv.apply(y));
                for _ in 0..60 {
                    let r = self.apply(x) - y;
                    let step = self.jacobian(x).inverse()?.apply(r);
                    x -= step;
                    if step.norm() <= 1e-16 * (1.0 + x.norm()) {
                        break;
                    }
                }
                ((self.apply(x) - y).norm() < 1e-12).then_some(x)
            }
        }
    }

    /// Analytic Lipschitz bound for log|det D|, with exponent 1.
    pub fn log_det_lipschitz(&self) -> f64 {
        match self {
            Branch::Affine(_) => 0.0,
            Branch::Sine { affine, amplitude, axis } => {
                let m = affine.linear.matrix();
                let cof = if affine.dim() == 1 { 1.0 } else if *axis == 0 { m[(1, 1)] } else { m[(0, 0)] };
                let d = affine.linear.det().abs();
                let swing = 2.0 * PI * amplitude.abs() * cof.abs();
                if swing >= d {
                    return f64::INFINITY;
                }
                2.0 * PI * swing / (d - swing)
            }
        }
    }
}

/// How a region-charted generator is extended to all of M.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extension {
    /// Apply the branch formula everywhere and reduce mod 1 (tori).
    Wrap,
    /// At a point of region l apply the branch of region l.
    ChartWise,
}

/// Hölder data (C₀, α) of log|det Df|.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hoelder {
    pub c0: f64,
    pub alpha: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothMap {
    pub name: String,
    pub region: usize,
    pub branch: Branch,
    pub extension: Extension,
    pub hoelder: Hoelder,
}

/// Check injectivity of a branch on the closure of `region` and extend it to M.
pub fn extend_map(name: &str, branch: Branch, region: usize, partition: &Partition) -> Result<SmoothMap> {
    let space = partition.space();
    let r = partition.region(region);
    let det0 = branch.affine_part().linear.det();
    let injective = match &branch {
        Branch::Affine(a) => a.linear.det().abs() > 1e-12,
        Branch::Sine { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(region as u64);
            let mut pts = r.vertices();
            pts.extend((0..256).map(|_| r.sample(&mut rng)));
            branch.log_det_lipschitz().is_finite()
                && pts.iter().all(|&x| {
                    let d = branch.jacobian(x).det();
                    d.abs() > 1e-10 && d.signum() == det0.signum()
                })
        }
    };
    if !injective {
        return Err(Error::NotInjective(name.to_string()));
    }
    let extension = if space.is_torus() { Extension::Wrap } else { Extension::ChartWise };
    let hoelder = Hoelder { c0: branch.log_det_lipschitz(), alpha: 1.0, exact: true };
    Ok(SmoothMap { name: name.to_string(), region, branch, extension, hoelder })
}

/// Generators f_0..f_{p+q-1}; generator i is charted on region i.
#[derive(Clone, Debug, PartialEq)]
pub struct MapFamily {
    pub name: String,
    pub partition: Partition,
    pub maps: Vec<SmoothMap>,
    pub p: usize,
    pub q: usize,
    pub dither: f64,
}

impl MapFamily {
    pub fn new(name: &str, partition: Partition, maps: Vec<SmoothMap>, p: usize) -> Result<Self> {
        if maps.len() != partition.len() {
            return Err(Error::BadParameter(format!(
                "{} maps for {} regions",
                maps.len(),
                partition.len()
            )));
        }
        if p > maps.len() {
            return Err(Error::BadParameter("p exceeds the number of maps".into()));
        }
        for (i, m) in maps.iter().enumerate() {
            if m.region != i {
                return Err(Error::BadParameter(format!("map {i} is charted on region {}", m.region)));
            }
            if m.branch.affine_part().dim() != partition.space().dim() {
                return Err(Error::DimensionMismatch {
                    expected: partition.space().dim(),
                    got: m.branch.affine_part().dim(),
                });
            }
        }
        let q = maps.len() - p;
        Ok(MapFamily { name: name.to_string(), partition, maps, p, q, dither: DEFAULT_DITHER })
    }

    pub fn with_dither(mut self, amplitude: f64) -> Self {
        self.dither = amplitude;
        self
    }

    pub fn with_extension(mut self, e: Extension) -> Self {
        for m in &mut self.maps {
            m.extension = e;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn space(&self) -> &PhaseSpace {
        self.partition.space()
    }

    pub fn dim(&self) -> usize {
        self.space().dim()
    }

    pub fn region(&self, i: usize) -> &Region {
        self.partition.region(i)
    }

    pub fn locate(&self, y: Point) -> Location {
        self.partition.locate(y)
    }

    pub fn is_affine(&self) -> bool {
        self.maps.iter().all(|m| m.branch.is_affine())
    }

    /// The branch used by generator i at a point located in `loc`.
    fn branch_at(&self, i: usize, y: Point, loc: Location) -> &Branch {
        match self.maps[i].extension {
            Extension::Wrap => &self.maps[i].branch,
            Extension::ChartWise => {
                let l = match loc {
                    Location::Interior(l) => l,
                    _ => self.partition.closures_containing(y, 1e-9).first().copied().unwrap_or(i),
                };
                &self.maps[l].branch
            }
        }
    }

    /// Global generator i evaluated at `y`, given its location.
    pub fn apply_located(&self, i: usize, y: Point, loc: Location) -> Point {
        self.space().wrap(self.branch_at(i, y, loc).apply(y))
    }

    pub fn apply(&self, i: usize, y: Point) -> Point {
        let loc = if self.needs_location(i) { self.locate(y) } else { Location::Outside };
        self.apply_located(i, y, loc)
    }

    pub fn jacobian_located(&self, i: usize, y: Point, loc: Location) -> Linear {
        self.branch_at(i, y, loc).jacobian(y)
    }

    pub fn jacobian(&self, i: usize, y: Point) -> Linear {
        let loc = if self.needs_location(i) { self.locate(y) } else { Location::Outside };
        self.jacobian_located(i, y, loc)
    }

    pub fn needs_location(&self, i: usize) -> bool {
        self.maps[i].extension == Extension::ChartWise
    }

    /// Local branch of region i applied without reduction (stays in the cover).
    pub fn local(&self, i: usize, y: Point) -> Point {
        self.maps[i].branch.apply(y)
    }

    /// All x in M with f_i(x) = y. Piecewise generators have several.
    pub fn preimages(&self, i: usize, y: Point) -> Vec<Point> {
        let space = self.space();
        let mut out: Vec<Point> = Vec::new();
        let mut push = |x: Point| {
            if !out.iter().any(|o| space.distance(*o, x) < 1e-12) {
                out.push(x);
            }
        };
        match self.maps[i].extension {
            Extension::Wrap => {
                let b = &self.maps[i].branch;
                let (lo, hi) = branch_cube_image(b, space.dim());
                let range = |c: usize| {
                    let a = (lo[c] - y[c] - 1e-9).floor() as i64;
                    let z = (hi[c] - y[c] + 1e-9).ceil() as i64;
                    a..=z
                };
                let ys: Vec<i64> = if space.dim() == 2 { range(1).collect() } else { vec![0] };
                for kx in range(0) {
                    for &ky in &ys {
                        let target = y + Point::new(kx as f64, ky as f64);
                        if let Some(x) = b.solve(target, None) {
                            let inside = (0..space.dim()).all(|c| x[c] >= -1e-12 && x[c] <= 1.0 + 1e-12);
                            if inside {
                                push(space.wrap(x));
                            }
                        }
                    }
                }
            }
            Extension::ChartWise => {
                for (l, m) in self.maps.iter().enumerate() {
                    for k in space.lifts() {
                        if let Some(x) = m.branch.solve(y + k, None) {
                            if self.region(l).contains(x, 1e-12) {
                                push(space.wrap(x));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn spec(&self) -> FamilySpec {
        FamilySpec {
            name: self.name.clone(),
            space: self.space().clone(),
            regions: self.partition.regions.clone(),
            maps: self.maps.iter().map(MapSpec::from_map).collect(),
            p: self.p,
            q: self.q,
            dither: self.dither,
        }
    }

    pub fn from_spec(spec: &FamilySpec) -> Result<Self> {
        let partition = Partition::new(spec.space.clone(), spec.regions.clone())?;
        let maps = spec
            .maps
            .iter()
            .enumerate()
            .map(|(i, m)| m.to_map(i, spec.space.dim()))
            .collect::<Result<Vec<_>>>()?;
        if spec.p + spec.q != maps.len() {
            return Err(Error::BadParameter(format!("p + q = {} but {} maps", spec.p + spec.q, maps.len())));
        }
        Ok(MapFamily::new(&spec.name, partition, maps, spec.p)?.with_dither(spec.dither))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.spec()).expect("family serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: FamilySpec = serde_json::from_str(text).map_err(|e| Error::Scene(e.to_string()))?;
        MapFamily::from_spec(&spec)
    }
}

/// Bounding box of the image of [0,1]^m under a branch.
fn branch_cube_image(b: &Branch, dim: usize) -> (Point, Point) {
    let corners: Vec<Point> = if dim == 1 {
        vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]
    } else {
        vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0), Point::new(1.0, 1.0)]
    };
    let a = b.affine_part();
    let mut lo = Point::repeat(f64::INFINITY);
    let mut hi = Point::repeat(f64::NEG_INFINITY);
    for c in corners {
        let v = a.apply(c);
        lo = lo.inf(&v);
        hi = hi.sup(&v);
    }
    if let Branch::Sine { amplitude, axis, .. } = b {
        lo[*axis] -= amplitude.abs();
        hi[*axis] += amplitude.abs();
    }
    (lo, hi)
}

/// Serialized generator: `{kind, matrix, offset, chart, ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    pub kind: String,
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
    pub chart: usize,
    pub extension: Extension,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<usize>,
    pub hoelder: Hoelder,
}

impl MapSpec {
    fn from_map(m: &SmoothMap) -> Self {
        let a = m.branch.affine_part();
        let offset = if a.dim() == 1 { vec![a.offset.x] } else { vec![a.offset.x, a.offset.y] };
        let (kind, amplitude, axis) = match &m.branch {
            Branch::Affine(_) => ("affine", None, None),
            Branch::Sine { amplitude, axis, .. } => ("sine", Some(*amplitude), Some(*axis)),
        };
        MapSpec {
            name: m.name.clone(),
            kind: kind.into(),
            matrix: a.linear.rows(),
            offset,
            chart: m.region,
            extension: m.extension,
            amplitude,
            axis,
            hoelder: m.hoelder,
        }
    }

    fn to_map(&self, index: usize, dim: usize) -> Result<SmoothMap> {
        let linear = Linear::from_rows(&self.matrix)?;
        if linear.dim() != dim || self.offset.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: linear.dim() });
        }
        let offset = Point::new(self.offset[0], if dim == 2 { self.offset[1] } else { 0.0 });
        let affine = AffineMap::new(linear, offset);
        let branch = match self.kind.as_str() {
            "affine" => Branch::Affine(affine),
            "sine" => Branch::Sine {
                affine,
                amplitude: self.amplitude.unwrap_or(0.0),
                axis: self.axis.unwrap_or(0).min(dim - 1),
            },
            other => return Err(Error::Scene(format!("unknown map kind `{other}`"))),
        };
        if self.chart != index {
            return Err(Error::Scene(format!("map {index} declares chart {}", self.chart)));
        }
        Ok(SmoothMap { name: self.name.clone(), region: index, branch, extension: self.extension, hoelder: self.hoelder })
    }
}

/// Self-contained family document: space, regions and maps together.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    pub space: PhaseSpace,
    pub regions: Vec<Region>,
    pub maps: Vec<MapSpec>,
    pub p: usize,
    pub q: usize,
    #[serde(default = "default_dither")]
    pub dither: f64,
}

fn default_dither() -> f64 {
    DEFAULT_DITHER
}
