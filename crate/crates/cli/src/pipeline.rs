//! Stage runners shared by `run` and the single-purpose subcommands.

use std::sync::Arc;

use anyhow::{bail, Context as _, Result};
use ergolab_core::conditions::{
    check_det_condition, check_markov, constants_sheet, estimate_sigmas, validate_topological_partition, ConstantsSheet,
    Overrides,
};
use ergolab_core::cylinders::{
    cylinder, diameter_decay_check, distortion_ratio, is_hyperbolic_cylinder, TriState,
};
use ergolab_core::ergodicity::{default_observables, ergodicity_experiment, invariant_set_probe, ErgodicityReport};
use ergolab_core::expansion::{check_orbital_nue, hyperbolic_frequency, iterate_partial, itinerary, pliss_times};
use ergolab_core::geometry::{Location, PhaseSpace, Point, Polytope, Region};
use ergolab_core::irreducibility::{residual_density_check, transitivity_matrix, weak_cycle_test};
use ergolab_core::symbolic::{SymbolStream, Word};
use ergolab_core::systems::{
    build_expanding_family, build_mostly_expanding_family, doubling, doubling_torus2, perturbed_doubling,
    rational_rotations, triangle_expanding, triangle_mostly_expanding, two_arc_control, MapFamily,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    BuilderParams, ConstantsConfig, CylinderConfig, ErgodicityConfig, ExpansionConfig, FamilySource, IrreducibilityConfig,
};

pub const PRESETS: &[&str] = &[
    "doubling",
    "perturbed-doubling",
    "triangle-expanding",
    "triangle-mostly-expanding",
    "two-arc-control",
    "rational-rotations",
    "doubling-torus2",
];

pub fn build_family(b: &BuilderParams) -> Result<MapFamily> {
    let space = match b.space.as_str() {
        "torus1" => PhaseSpace::torus(1)?,
        "torus2" => PhaseSpace::torus(2)?,
        "triangle" => PhaseSpace::standard_triangle(),
        other => bail!("unknown space `{other}` (expected torus1, torus2 or triangle)"),
    };
    let t = space.simplices();
    let mut f = match b.beta {
        Some(beta) => build_mostly_expanding_family(&space, &t, beta)?,
        None => build_expanding_family(&space, &t, b.depth.unwrap_or(1))?,
    };
    f.name = match b.beta {
        Some(beta) => format!("{}-beta{beta}", b.space),
        None => format!("{}-depth{}", b.space, b.depth.unwrap_or(1)),
    };
    Ok(f)
}

pub fn preset(name: &str, amplitude: Option<f64>) -> Result<MapFamily> {
    Ok(match name {
        "doubling" => doubling(),
        "perturbed-doubling" => perturbed_doubling(amplitude.unwrap_or(1e-2))?,
        "triangle-expanding" => triangle_expanding(1)?,
        "triangle-mostly-expanding" => triangle_mostly_expanding(0.5)?,
        "two-arc-control" => two_arc_control(),
        "rational-rotations" => rational_rotations(),
        "doubling-torus2" => doubling_torus2(),
        other => bail!("unknown preset `{other}`; available: {}", PRESETS.join(", ")),
    })
}

pub fn load_family(src: &FamilySource) -> Result<MapFamily> {
    match src {
        FamilySource::Builder(b) => build_family(b),
        FamilySource::Preset { name, amplitude } => preset(name, *amplitude),
        FamilySource::File(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            MapFamily::from_json(&text).with_context(|| format!("parsing family {}", path.display()))
        }
    }
}

/// Outcome of one stage: a pass flag, failure messages and a JSON body.
pub struct StageOutcome {
    pub pass: bool,
    pub failures: Vec<String>,
    pub body: Value,
}

impl StageOutcome {
    fn new(failures: Vec<String>, body: Value) -> Self {
        StageOutcome { pass: failures.is_empty(), failures, body }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub(crate) fn coords(fam: &MapFamily, p: Point) -> Vec<f64> {
    if fam.dim() == 1 {
        vec![p.x]
    } else {
        vec![p.x, p.y]
    }
}

/// Random starts off the skeleton.
fn interior_points(fam: &MapFamily, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x = fam.space().sample(rng);
        if matches!(fam.locate(x), Location::Interior(_)) {
            out.push(x);
        }
    }
    out
}

pub struct Context {
    pub fam: MapFamily,
    pub seed: u64,
    pub overrides: ConstantsConfig,
    sheet: Option<ConstantsSheet>,
}

impl Context {
    pub fn new(fam: MapFamily, seed: u64, overrides: ConstantsConfig) -> Self {
        Context { fam, seed, overrides, sheet: None }
    }

    pub fn constants(&mut self) -> Result<&ConstantsSheet> {
        if self.sheet.is_none() {
            let o = Overrides { c: self.overrides.c, epsilon0: self.overrides.epsilon0 };
            self.sheet = Some(constants_sheet(&self.fam, o, false, self.seed)?);
        }
        Ok(self.sheet.as_ref().expect("just set"))
    }
}

pub fn conditions(ctx: &mut Context) -> Result<StageOutcome> {
    let seed = ctx.seed;
    let fam = &ctx.fam;
    let partition = validate_topological_partition(&fam.partition, 10_000, seed);
    let markov = check_markov(fam, 1000, seed);
    let sigmas = estimate_sigmas(fam, 512, seed);
    let det = if fam.q > 0 { Some(check_det_condition(fam, 512, seed)?) } else { None };
    let mut failures = Vec::new();
    if !partition.pass {
        failures.push("conditions: partition is not a topological partition".to_string());
    }
    if !markov.pass {
        failures.push(format!("conditions: Markov property fails for {} pairs", markov.violations.len()));
    }
    if sigmas.not_expanding {
        failures.push(format!("conditions: expanding maps have sigma1 = {} <= 1", sigmas.sigma1));
    }
    if det.as_ref().is_some_and(|d| !d.holds) {
        failures.push(format!("conditions: |det Df| <= q = {} on a near-neutral region", fam.q));
    }
    let sheet = match ctx.constants() {
        Ok(s) => Some(s.clone()),
        Err(e) => {
            failures.push(format!("conditions: {e}"));
            None
        }
    };
    if let Some(sheet) = &sheet {
        if sheet.epsilon0.is_none() {
            failures.push(format!("conditions: no epsilon0 in (0,1) for c = {}", sheet.c.value));
        } else if !sheet.consistent {
            failures.push("conditions: configured (c, epsilon0) violate the expansion inequality".to_string());
        }
    }
    let body = json!({
        "partition": to_value(&partition),
        "markov": to_value(&markov),
        "sigmas": to_value(&sigmas),
        "determinant": det.as_ref().map(to_value),
        "constants": sheet.as_ref().map(to_value),
    });
    Ok(StageOutcome::new(failures, body))
}

#[derive(Serialize)]
struct StartRow {
    start: Vec<f64>,
    horizon: usize,
    average: f64,
    nue: bool,
    hyperbolic_frequency: f64,
    truncated_at: Option<usize>,
}

pub fn expansion(ctx: &mut Context, cfg: &ExpansionConfig) -> Result<StageOutcome> {
    let sheet = ctx.constants()?.clone();
    let fam = &ctx.fam;
    let c = sheet.c.value;
    let eps0 = sheet.epsilon0.map(|e| e.value);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0xe4);
    let starts = interior_points(fam, cfg.starts, &mut rng);
    let src = Arc::new(fam.clone());
    let rows: Vec<StartRow> = starts
        .par_iter()
        .map(|&x| -> Result<StartRow> {
            let s = SymbolStream::itinerary(src.clone(), x);
            let rec = iterate_partial(fam, x, &s, cfg.steps)?;
            let nue = check_orbital_nue(&rec, c);
            Ok(StartRow {
                start: coords(fam, x),
                horizon: rec.len(),
                average: nue.average,
                nue: nue.pass,
                hyperbolic_frequency: hyperbolic_frequency(&pliss_times(&rec.a, c), rec.len().max(1)),
                truncated_at: rec.truncated_at,
            })
        })
        .collect::<Result<_>>()?;
    let good = rows
        .iter()
        .filter(|r| r.nue && r.truncated_at.is_none() && eps0.is_some_and(|e| r.hyperbolic_frequency >= e))
        .count();
    let fraction = good as f64 / rows.len() as f64;
    let mut failures = Vec::new();
    if eps0.is_none() {
        failures.push("expansion: no epsilon0 to compare frequencies against".to_string());
    } else if fraction < 0.99 {
        failures.push(format!("expansion: only {good}/{} starts are NUE with frequency >= epsilon0", rows.len()));
    }
    let body = json!({
        "c": c,
        "epsilon0": eps0,
        "stream": "itinerary-driven",
        "good_fraction": fraction,
        "starts": to_value(&rows),
    });
    Ok(StageOutcome::new(failures, body))
}

#[derive(Serialize)]
struct CylinderRow {
    word: Vec<usize>,
    measure: f64,
    hyperbolic: TriState,
    decay_violations: usize,
    pairs: usize,
    distortion_violations: usize,
    worst_distortion: f64,
}

/// Which checks the cylinder stage performs.
#[derive(Clone, Copy, Debug)]
pub struct CylinderChecks {
    pub diameter: bool,
    pub distortion: bool,
}

impl Default for CylinderChecks {
    fn default() -> Self {
        CylinderChecks { diameter: true, distortion: true }
    }
}

fn check_cylinder(ctx: &mut Context, word: &Word, pairs: usize, checks: CylinderChecks) -> Result<CylinderRow> {
    let sheet = ctx.constants()?.clone();
    let fam = &ctx.fam;
    let (c, k2, l1) = (sheet.c.value, sheet.k2.value, sheet.l1.value);
    let cyl = cylinder(fam, word, 2 * pairs.max(1), ctx.seed)?;
    if cyl.empty {
        bail!("cylinder {:?} is empty", word.symbols());
    }
    let hyperbolic = is_hyperbolic_cylinder(fam, &cyl, c)?;
    let decay_violations = if checks.diameter && !matches!(hyperbolic, TriState::No { .. }) {
        diameter_decay_check(fam, &cyl, c, k2)?.rows.iter().filter(|r| !r.ok).count()
    } else {
        0
    };
    let mut worst: f64 = 1.0;
    let mut bad = 0;
    let mut used = 0;
    if checks.distortion {
        for pair in cyl.samples.chunks_exact(2).take(pairs) {
            let r = distortion_ratio(fam, word, pair[0], pair[1])?;
            worst = worst.max(r.max(1.0 / r));
            bad += usize::from(r > l1 * (1.0 + 1e-12) || r < 1.0 / l1 * (1.0 - 1e-12));
            used += 1;
        }
    }
    Ok(CylinderRow {
        word: word.symbols().to_vec(),
        measure: cyl.measure,
        hyperbolic,
        decay_violations,
        pairs: used,
        distortion_violations: bad,
        worst_distortion: worst,
    })
}

pub fn cylinder_single(ctx: &mut Context, word: &Word, pairs: usize, checks: CylinderChecks) -> Result<StageOutcome> {
    let row = check_cylinder(ctx, word, pairs, checks)?;
    let sheet = ctx.constants()?;
    let mut failures = Vec::new();
    if row.decay_violations > 0 {
        failures.push(format!("cylinder: {} diameter-decay violations", row.decay_violations));
    }
    if row.distortion_violations > 0 {
        failures.push(format!("cylinder: {} distortion ratios outside [1/L1, L1]", row.distortion_violations));
    }
    let body = json!({ "c": sheet.c.value, "k2": sheet.k2.value, "l1": sheet.l1.value, "cylinder": to_value(&row) });
    Ok(StageOutcome::new(failures, body))
}

pub fn cylinders(ctx: &mut Context, cfg: &CylinderConfig) -> Result<StageOutcome> {
    let c = ctx.constants()?.c.value;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ 0xc7);
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    let mut attempts = 0usize;
    while rows.len() < cfg.count && attempts < 100 * cfg.count.max(1) {
        attempts += 1;
        let x = interior_points(&ctx.fam, 1, &mut rng)[0];
        let n = rng.random_range(1..=cfg.max_length);
        let Ok(w) = itinerary(&ctx.fam, x, n) else { continue };
        let cyl = cylinder(&ctx.fam, &w, 64, ctx.seed)?;
        if cyl.empty || matches!(is_hyperbolic_cylinder(&ctx.fam, &cyl, c)?, TriState::No { .. }) {
            skipped += 1;
            continue;
        }
        rows.push(check_cylinder(ctx, &w, cfg.pairs, CylinderChecks::default())?);
    }
    let decay: usize = rows.iter().map(|r| r.decay_violations).sum();
    let distortion: usize = rows.iter().map(|r| r.distortion_violations).sum();
    let mut failures = Vec::new();
    if decay > 0 {
        failures.push(format!("cylinders: {decay} diameter-decay violations"));
    }
    if distortion > 0 {
        failures.push(format!("cylinders: {distortion} distortion ratios outside [1/L1, L1]"));
    }
    if rows.len() < cfg.count {
        failures.push(format!("cylinders: found only {} hyperbolic cylinders", rows.len()));
    }
    let sheet = ctx.constants()?;
    let body = json!({
        "c": c,
        "k2": sheet.k2.value,
        "l1": sheet.l1.value,
        "non_hyperbolic_skipped": skipped,
        "cylinders": to_value(&rows),
    });
    Ok(StageOutcome::new(failures, body))
}

/// Test set for the weak-cycle check: an arc of length 0.1, or a square of
/// normalized measure 0.1.
pub fn weak_cycle_target(space: &PhaseSpace) -> Result<Region> {
    if space.dim() == 1 {
        return Ok(Region::interval(0.1, 0.2)?);
    }
    let side = (0.1 * space.volume()).sqrt();
    let sq = Polytope::polygon(vec![
        Point::new(0.1, 0.1),
        Point::new(0.1 + side, 0.1),
        Point::new(0.1 + side, 0.1 + side),
        Point::new(0.1, 0.1 + side),
    ])?;
    Ok(Region::new(vec![sq])?)
}

pub fn irreducibility(ctx: &mut Context, cfg: &IrreducibilityConfig) -> Result<StageOutcome> {
    let fam = &ctx.fam;
    let trans = transitivity_matrix(fam, cfg.depth, cfg.samples.min(64), ctx.seed);
    let residual = residual_density_check(fam, cfg.eps, cfg.depth, cfg.samples.min(64), cfg.probes, ctx.seed);
    let weak = weak_cycle_test(fam, &weak_cycle_target(fam.space())?, cfg.samples, cfg.depth, ctx.seed);
    let mut failures = Vec::new();
    if !trans.transitive {
        failures.push(format!("irreducibility: not transitive within depth {}", cfg.depth));
    }
    if weak.flagged {
        failures.push(format!("irreducibility: weak-cycle hit fraction {}", weak.hit_fraction));
    }
    let body = json!({
        "transitivity": to_value(&trans),
        // statistical evidence for a topological statement: reported, never fatal
        "residual_density": to_value(&residual),
        "weak_cycle": to_value(&weak),
    });
    Ok(StageOutcome::new(failures, body))
}

pub fn ergodicity(ctx: &mut Context, cfg: &ErgodicityConfig) -> Result<(StageOutcome, ErgodicityReport)> {
    let fam = &ctx.fam;
    let report = ergodicity_experiment(fam, &default_observables(fam), cfg.starts, cfg.steps, cfg.stream, ctx.seed)?;
    let probe = invariant_set_probe(fam, cfg.grid, cfg.iterations)?;
    let mut failures = Vec::new();
    for o in report.observables.iter().filter(|o| !o.pass) {
        failures.push(format!(
            "ergodicity: {} spread {} / deviation {} above tolerance {}",
            o.name, o.std, o.deviation, report.tolerance
        ));
    }
    if !probe.only_full {
        failures.push(format!("ergodicity: invariant set of measure {:?}", probe.sets.iter().map(|s| s.measure).collect::<Vec<_>>()));
    }
    let body = json!({ "experiment": to_value(&report), "invariant_sets": to_value(&probe) });
    Ok((StageOutcome::new(failures, body), report))
}

/// CSV rows observable,start,average.
pub fn write_averages_csv(path: &std::path::Path, report: &ErgodicityReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["observable", "start", "average", "integral"])?;
    for o in &report.observables {
        for (i, a) in o.averages.iter().enumerate() {
            w.write_record([o.name.clone(), i.to_string(), fmt15(*a), fmt15(o.integral)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Orbit from one start with per-step rows for CSV output.
pub fn orbit(
    ctx: &mut Context,
    start: Point,
    steps: usize,
    stream: SymbolStream,
    csv_path: Option<&std::path::Path>,
) -> Result<StageOutcome> {
    let c = ctx.constants()?.c.value;
    let fam = &ctx.fam;
    let rec = iterate_partial(fam, start, &stream, steps)?;
    let h = pliss_times(&rec.a, c);
    let nue = check_orbital_nue(&rec, c);
    if let Some(path) = csv_path {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        let mut header = vec!["step", "symbol", "x"];
        if fam.dim() == 2 {
            header.push("y");
        }
        header.extend(["a", "cumulative", "hyperbolic"]);
        w.write_record(&header)?;
        let mut times = h.times.iter().peekable();
        let mut sum = 0.0;
        for (j, &a) in rec.a.iter().enumerate() {
            sum += a;
            let n = j + 1;
            let is_h = times.next_if(|&&t| t == n).is_some();
            let mut row = vec![n.to_string(), rec.symbols.symbols()[j].to_string()];
            row.extend(coords(fam, rec.points[n]).into_iter().map(fmt15));
            row.extend([fmt15(a), fmt15(sum), is_h.to_string()]);
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    let mut failures = Vec::new();
    if !nue.pass {
        failures.push(format!("orbit: average {} is above -c = {}", nue.average, -c));
    }
    let body = json!({
        "start": coords(fam, start),
        "stream": to_value(&stream.to_spec()),
        "truncated_at": rec.truncated_at,
        "nue": to_value(&nue),
        "hyperbolic_times": h.times.len(),
        "hyperbolic_frequency": hyperbolic_frequency(&h, rec.len().max(1)),
        "expanding_fraction": ergolab_core::expansion::expanding_fraction(&rec, fam.p),
    });
    Ok(StageOutcome::new(failures, body))
}

/// A float with 15 significant digits, in its shortest form.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.14e}").parse().expect("formatted float parses")
}

pub fn fmt15(x: f64) -> String {
    round15(x).to_string()
}

/// Rounds every non-integer number in a JSON tree to 15 significant digits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round15(n.as_f64().expect("f64"));
            *v = serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_digits() {
        assert_eq!(round15(0.1 + 0.2), 0.3);
        assert_eq!(fmt15(std::f64::consts::PI), "3.14159265358979");
        assert_eq!(round15(2.0), 2.0);
        let mut v = json!({"a": [1.0000000000000002, 3], "b": {"c": 1e-20}});
        round_json(&mut v);
        assert_eq!(v.to_string(), r#"{"a":[1.0,3],"b":{"c":1e-20}}"#);
    }

    #[test]
    fn builders_and_presets_load() {
        for space in ["torus1", "torus2", "triangle"] {
            let f = build_family(&BuilderParams { space: space.into(), depth: Some(1), beta: None }).unwrap();
            assert!(f.len() >= 2);
        }
        for name in PRESETS {
            preset(name, None).unwrap();
        }
        assert!(preset("nope", None).is_err());
    }
}
