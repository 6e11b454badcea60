//! Experiment configuration. Unknown fields are rejected and every error
//! carries the path of the offending field.

use std::path::PathBuf;

use ergolab_core::ergodicity::ExperimentStream;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Mandatory: there is no ambient randomness.
    pub seed: u64,
    pub family: FamilySource,
    #[serde(default)]
    pub constants: ConstantsConfig,
    #[serde(default)]
    pub experiments: Vec<Stage>,
    #[serde(default)]
    pub expansion: ExpansionConfig,
    #[serde(default)]
    pub cylinders: CylinderConfig,
    #[serde(default)]
    pub irreducibility: IrreducibilityConfig,
    #[serde(default)]
    pub ergodicity: ErgodicityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySource {
    Builder(BuilderParams),
    Preset {
        name: String,
        #[serde(default)]
        amplitude: Option<f64>,
    },
    File(PathBuf),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuilderParams {
    /// torus1, torus2 or triangle.
    pub space: String,
    #[serde(default)]
    pub depth: Option<usize>,
    /// Face fraction of the near-neutral builder; selects it when present.
    #[serde(default)]
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub c: Option<f64>,
    pub epsilon0: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Conditions,
    Expansion,
    Cylinders,
    Irreducibility,
    Ergodicity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionConfig {
    pub starts: usize,
    pub steps: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig { starts: 100, steps: 10_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CylinderConfig {
    pub count: usize,
    pub max_length: usize,
    pub pairs: usize,
}

impl Default for CylinderConfig {
    fn default() -> Self {
        CylinderConfig { count: 20, max_length: 10, pairs: 200 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IrreducibilityConfig {
    pub depth: usize,
    pub eps: f64,
    pub samples: usize,
    pub probes: usize,
}

impl Default for IrreducibilityConfig {
    fn default() -> Self {
        IrreducibilityConfig { depth: 8, eps: 0.05, samples: 200, probes: 1000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ErgodicityConfig {
    pub starts: usize,
    pub steps: usize,
    pub stream: ExperimentStream,
    pub grid: usize,
    pub iterations: usize,
}

impl Default for ErgodicityConfig {
    fn default() -> Self {
        ErgodicityConfig { starts: 20, steps: 100_000, stream: ExperimentStream::IidUniform, grid: 64, iterations: 10_000 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub family: Option<PathBuf>,
}

/// A configuration problem with the path of the field at fault.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config at `{}`: {}", self.path, self.message)
    }
}

fn bad(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.into(), message: message.into() }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            bad(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad("schema_version", format!("expected {SCHEMA_VERSION}")));
        }
        if let FamilySource::Builder(b) = &self.family {
            if !["torus1", "torus2", "triangle"].contains(&b.space.as_str()) {
                return Err(bad("family.builder.space", "expected torus1, torus2 or triangle"));
            }
        }
        if let Some(c) = self.constants.c {
            if !(c > 0.0) {
                return Err(bad("constants.c", "must be positive"));
            }
        }
        let positive = [
            ("expansion.starts", self.expansion.starts),
            ("expansion.steps", self.expansion.steps),
            ("cylinders.max_length", self.cylinders.max_length),
            ("irreducibility.samples", self.irreducibility.samples),
            ("irreducibility.probes", self.irreducibility.probes),
            ("ergodicity.starts", self.ergodicity.starts),
            ("ergodicity.steps", self.ergodicity.steps),
        ];
        for (path, v) in positive {
            if v == 0 {
                return Err(bad(path, "must be at least 1"));
            }
        }
        if !(self.irreducibility.eps > 0.0) {
            return Err(bad("irreducibility.eps", "must be positive"));
        }
        if self.ergodicity.grid < 16 {
            return Err(bad("ergodicity.grid", "must be at least 16"));
        }
        Ok(())
    }

    /// Requested stages, deduplicated, in dependency order.
    pub fn stages(&self) -> Vec<Stage> {
        let mut s = self.experiments.clone();
        s.sort();
        s.dedup();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn errors_name_the_field() {
        let e = ExperimentConfig::parse(r#"{"seed": 1, "family": {"preset": {"name": "doubling"}}, "ergodicity": {"starts": "x"}}"#)
            .unwrap_err();
        assert_eq!(e.path, "ergodicity.starts");
        let e = ExperimentConfig::parse(r#"{"family": {"preset": {"name": "doubling"}}}"#).unwrap_err();
        assert!(e.message.contains("seed"));
        let e = ExperimentConfig::parse(r#"{"seed": 1, "family": {"preset": {"name": "doubling"}}, "bogus": 1}"#).unwrap_err();
        assert!(e.message.contains("bogus"));
        let e = ExperimentConfig::parse(r#"{"seed": 1, "family": {"preset": {"name": "doubling"}}, "ergodicity": {"grid": 4}}"#)
            .unwrap_err();
        assert_eq!(e.path, "ergodicity.grid");
    }

    #[test]
    fn stages_sorted() {
        let c = ExperimentConfig::parse(
            r#"{"seed": 1, "family": {"preset": {"name": "doubling"}}, "experiments": ["ergodicity", "conditions", "ergodicity"]}"#,
        )
        .unwrap();
        assert_eq!(c.stages(), vec![Stage::Conditions, Stage::Ergodicity]);
    }
}
