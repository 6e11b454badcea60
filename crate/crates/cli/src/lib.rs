//! Command line front end. `run_cli` returns the process exit code:
//! 0 when every requested check passes, 1 on a check failure, 2 on a usage error.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ergolab_core::ergodicity::{ExperimentStream, CAVEAT};
use ergolab_core::geometry::Point;
use ergolab_core::symbolic::{SymbolStream, Word};
use ergolab_core::systems::MapFamily;
use serde_json::{json, Value};

use config::{
    BuilderParams, ConstantsConfig, ErgodicityConfig, ExperimentConfig, FamilySource, IrreducibilityConfig, Stage,
    SCHEMA_VERSION,
};
use pipeline::{Context, CylinderChecks, StageOutcome};

#[derive(Parser, Debug)]
#[command(name = "ergolab", version, about = "Experiments on semigroup actions of expanding maps")]
pub struct Cli {
    /// Worker threads (ERGOLAB_THREADS takes precedence when set).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a family from a triangulation or a preset and write its JSON.
    Build {
        #[arg(long, conflicts_with = "preset")]
        space: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        /// Build the near-neutral family with this face fraction.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the standing conditions and print the constants sheet.
    Check {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        constants: ConstantArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Follow one orbital branch and report its expansion.
    Orbit {
        #[command(flatten)]
        family: FamilyArgs,
        /// Start point, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        start: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        steps: usize,
        #[command(flatten)]
        constants: ConstantArgs,
        #[arg(long, value_enum, default_value_t = StreamArg::ItineraryDriven)]
        stream: StreamArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Diameter decay and distortion on one cylinder.
    Cylinder {
        #[command(flatten)]
        family: FamilyArgs,
        /// Symbols, 0-based and comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        word: Vec<usize>,
        #[command(flatten)]
        constants: ConstantArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [CheckArg::Diameter, CheckArg::Distortion])]
        check: Vec<CheckArg>,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Transitivity, orbit-tree density and the weak-cycle test.
    Transitivity {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 8)]
        depth: usize,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1000)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Birkhoff-average experiment and invariant-set probe.
    Ergodicity {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 20)]
        starts: usize,
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = StreamArg::IidUniform)]
        stream: StreamArg,
        #[arg(long, default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the stages listed in a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.json from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct FamilyArgs {
    /// Family JSON written by `build`.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub family: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub amplitude: Option<f64>,
}

impl FamilyArgs {
    fn source(&self) -> FamilySource {
        match (&self.family, &self.preset) {
            (Some(p), _) => FamilySource::File(p.clone()),
            (None, Some(name)) => FamilySource::Preset { name: name.clone(), amplitude: self.amplitude },
            (None, None) => unreachable!("clap requires one of --family and --preset"),
        }
    }
}

#[derive(Args, Debug)]
pub struct ConstantArgs {
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub epsilon0: Option<f64>,
}

impl ConstantArgs {
    fn get(&self) -> Result<ConstantsConfig> {
        if self.c.is_some_and(|c| !(c > 0.0)) {
            return Err(Usage("--c must be positive".into()).into());
        }
        Ok(ConstantsConfig { c: self.c, epsilon0: self.epsilon0 })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StreamArg {
    IidUniform,
    ItineraryDriven,
}

impl From<StreamArg> for ExperimentStream {
    fn from(s: StreamArg) -> Self {
        match s {
            StreamArg::IidUniform => ExperimentStream::IidUniform,
            StreamArg::ItineraryDriven => ExperimentStream::ItineraryDriven,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CheckArg {
    Diameter,
    Distortion,
}

/// An error caused by the invocation rather than by a failed check.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn family_summary(f: &MapFamily) -> Value {
    json!({
        "name": f.name,
        "space": f.space().name(),
        "dim": f.dim(),
        "maps": f.len(),
        "p": f.p,
        "q": f.q,
    })
}

fn emit(mut doc: Value, path: Option<&Path>) -> Result<()> {
    pipeline::round_json(&mut doc);
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Wraps a single stage into a report document; returns whether it passed.
fn single(command: &str, args: Value, fam: &MapFamily, out: StageOutcome, path: Option<&Path>) -> Result<bool> {
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "arguments": args,
        "family": family_summary(fam),
        "pass": out.pass,
        "failures": out.failures,
        "report": out.body,
    });
    emit(doc, path)?;
    for f in &out.failures {
        eprintln!("FAIL {f}");
    }
    Ok(out.pass)
}

fn context(family: &FamilyArgs, seed: u64, constants: ConstantsConfig) -> Result<Context> {
    let fam = pipeline::load_family(&family.source()).map_err(|e| Usage(format!("{e:#}")))?;
    Ok(Context::new(fam, seed, constants))
}

fn parse_start(fam: &MapFamily, v: &[f64]) -> Result<Point> {
    match (fam.dim(), v) {
        (1, [x]) => Ok(Point::new(*x, 0.0)),
        (2, [x, y]) => Ok(Point::new(*x, *y)),
        (d, _) => Err(Usage(format!("--start needs {d} coordinate(s), got {}", v.len())).into()),
    }
}

pub fn run_config(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<bool> {
    let fam = pipeline::load_family(&cfg.family).map_err(|e| Usage(format!("family: {e:#}")))?;
    let fam_json = cfg.output.family.as_ref().map(|p| (p, fam.to_json()));
    let mut ctx = Context::new(fam, cfg.seed, cfg.constants);
    let mut stages = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut caveat = None;
    for stage in cfg.stages() {
        let name = serde_json::to_value(stage)?;
        let outcome = match stage {
            Stage::Conditions => pipeline::conditions(&mut ctx),
            Stage::Expansion => pipeline::expansion(&mut ctx, &cfg.expansion),
            Stage::Cylinders => pipeline::cylinders(&mut ctx, &cfg.cylinders),
            Stage::Irreducibility => pipeline::irreducibility(&mut ctx, &cfg.irreducibility),
            Stage::Ergodicity => pipeline::ergodicity(&mut ctx, &cfg.ergodicity).and_then(|(o, rep)| {
                if let Some(p) = &cfg.output.csv {
                    pipeline::write_averages_csv(p, &rep)?;
                }
                caveat = Some(CAVEAT);
                Ok(o)
            }),
        };
        let outcome = outcome.unwrap_or_else(|e| StageOutcome {
            pass: false,
            failures: vec![format!("{}: {e:#}", name.as_str().unwrap_or("stage"))],
            body: Value::Null,
        });
        failures.extend(outcome.failures.iter().cloned());
        stages.push(json!({ "stage": name, "pass": outcome.pass, "failures": outcome.failures, "report": outcome.body }));
    }
    let resolved = if cfg.stages().is_empty() {
        Value::Null
    } else {
        match ctx.constants() {
            Ok(s) => json!({ "c": s.c.value, "epsilon0": s.epsilon0.map(|e| e.value) }),
            Err(_) => Value::Null,
        }
    };
    if let Some((p, text)) = fam_json {
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    let pass = failures.is_empty();
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "config": cfg,
        "resolved_constants": resolved,
        "family": family_summary(&ctx.fam),
        "pass": pass,
        "failures": failures,
        "stages": stages,
        "caveat": caveat,
    });
    emit(doc, out_override.or(cfg.output.json.as_deref()))?;
    for f in &failures {
        eprintln!("FAIL {f}");
    }
    Ok(pass)
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Build { space, depth, beta, preset, amplitude, out } => {
            let fam = match (space, preset) {
                (Some(space), None) => pipeline::build_family(&BuilderParams { space, depth, beta }),
                (None, Some(name)) => pipeline::preset(&name, amplitude),
                _ => bail!(Usage("build needs --space or --preset".into())),
            }
            .map_err(|e| Usage(format!("{e:#}")))?;
            let text = fam.to_json() + "\n";
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::Check { family, constants, seed, report } => {
            let mut ctx = context(&family, seed, constants.get()?)?;
            let out = pipeline::conditions(&mut ctx)?;
            let args = json!({ "c": constants.c, "epsilon0": constants.epsilon0, "seed": seed });
            single("check", args, &ctx.fam, out, report.as_deref())
        }
        Command::Orbit { family, start, steps, constants, stream, seed, csv, json } => {
            let mut ctx = context(&family, seed, constants.get()?)?;
            let x = parse_start(&ctx.fam, &start)?;
            let s = match stream {
                StreamArg::IidUniform => SymbolStream::iid(seed, ctx.fam.len())?,
                StreamArg::ItineraryDriven => SymbolStream::itinerary(std::sync::Arc::new(ctx.fam.clone()), x),
            };
            let out = pipeline::orbit(&mut ctx, x, steps, s, csv.as_deref()).map_err(|e| Usage(format!("{e:#}")))?;
            let args = json!({ "start": start, "steps": steps, "c": constants.c, "seed": seed });
            single("orbit", args, &ctx.fam, out, json.as_deref())
        }
        Command::Cylinder { family, word, constants, check, pairs, seed, json } => {
            let mut ctx = context(&family, seed, constants.get()?)?;
            let w = Word::new(word.clone(), ctx.fam.len()).map_err(|e| Usage(format!("--word: {e}")))?;
            let checks = CylinderChecks {
                diameter: check.contains(&CheckArg::Diameter),
                distortion: check.contains(&CheckArg::Distortion),
            };
            let out = pipeline::cylinder_single(&mut ctx, &w, pairs, checks).map_err(|e| Usage(format!("{e:#}")))?;
            let args = json!({ "word": word, "c": constants.c, "pairs": pairs, "seed": seed });
            single("cylinder", args, &ctx.fam, out, json.as_deref())
        }
        Command::Transitivity { family, depth, eps, samples, probes, seed, json } => {
            if !(eps > 0.0) || samples == 0 || probes == 0 {
                bail!(Usage("--eps, --samples and --probes must be positive".into()));
            }
            let mut ctx = context(&family, seed, ConstantsConfig::default())?;
            let cfg = IrreducibilityConfig { depth, eps, samples, probes };
            let out = pipeline::irreducibility(&mut ctx, &cfg)?;
            single("transitivity", serde_json::to_value(&cfg)?, &ctx.fam, out, json.as_deref())
        }
        Command::Ergodicity { family, starts, steps, stream, grid, iterations, seed, json, csv } => {
            if starts == 0 || steps == 0 || grid < 16 {
                bail!(Usage("--starts and --steps must be positive and --grid at least 16".into()));
            }
            let mut ctx = context(&family, seed, ConstantsConfig::default())?;
            let cfg = ErgodicityConfig { starts, steps, stream: stream.into(), grid, iterations };
            let (mut out, rep) = pipeline::ergodicity(&mut ctx, &cfg)?;
            if let Some(p) = &csv {
                pipeline::write_averages_csv(p, &rep)?;
            }
            if let Value::Object(m) = &mut out.body {
                m.insert("caveat".into(), CAVEAT.into());
            }
            let mut args = serde_json::to_value(&cfg)?;
            args["seed"] = seed.into();
            single("ergodicity", args, &ctx.fam, out, json.as_deref())
        }
        Command::Run { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Usage(format!("reading {}: {e}", config.display())))?;
            let cfg = ExperimentConfig::parse(&text).map_err(|e| Usage(e.to_string()))?;
            run_config(&cfg, out.as_deref())
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    match std::env::var("ERGOLAB_THREADS") {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Usage(format!("ERGOLAB_THREADS={v} is not a count")).into()),
        Err(_) => Ok(flag),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = thread_count(cli.threads).and_then(|n| {
        if let Some(n) = n {
            // A second call in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        dispatch(cli)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
