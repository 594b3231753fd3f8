//! Experiment configuration: a single JSON document describing the graph,
//! the unit model, simulation, embedding, and identification choices.
//!
//! Unknown keys warn instead of failing so configs stay forward-compatible;
//! the one deliberately inert key is `identify.delta`, which is accepted and
//! ignored with a warning. Validation runs before any computation.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};

fn default_schema() -> u32 {
    1
}

fn default_width() -> f64 {
    1e-4
}

fn default_substeps() -> usize {
    10
}

fn default_svd_tol() -> f64 {
    1e-10
}

fn default_selector() -> Vec<usize> {
    vec![0]
}

fn default_k_max() -> usize {
    2
}

fn default_brusselator_a() -> f64 {
    15.0
}

fn default_brusselator_b() -> f64 {
    9.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphGenerator {
    ErdosRenyi,
    DenseUniform,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSpec {
    pub generator: GraphGenerator,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_edge: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Built-in two-state linear unit.
    Linear,
    /// Built-in Brusselator unit with rate parameters a and b.
    Brusselator {
        #[serde(default = "default_brusselator_a")]
        a: f64,
        #[serde(default = "default_brusselator_b")]
        b: f64,
    },
    /// Arbitrary linear unit given by its matrices; `c` holds the output
    /// gradients as columns (unit dim x outputs).
    CustomLinear {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub q: usize,
    /// Snapshot pairs per trajectory (each trajectory has k+1 snapshots).
    #[serde(alias = "K")]
    pub k: usize,
    pub dt: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Subtract the final snapshot before embedding.
    #[default]
    Final,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmdSpec {
    /// Number of delays in the embedding.
    pub c: usize,
    #[serde(default = "default_svd_tol")]
    pub svd_tol: f64,
    /// Measured coordinates, indices into the stacked node outputs.
    #[serde(default = "default_selector")]
    pub selector: Vec<usize>,
    #[serde(default = "Centering::default")]
    pub centering: Centering,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifyMethod {
    /// Multiplicity filtering alone.
    Multiplicity,
    /// Multiplicity filtering, then re-admit candidates near the hull.
    HullExtend,
    /// Multiplicity filtering, then keep candidates in the nonnegative
    /// real-axis box.
    RealAxis,
    /// Multiplicity filtering, then estimate moments from the hull.
    HullMoments,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentifySpec {
    pub epsilon: f64,
    pub method: IdentifyMethod,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Accepted for compatibility, never consumed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub lambda2_refined: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub graph: GraphSpec,
    pub model: ModelSpec,
    pub simulation: SimulationSpec,
    pub dmd: DmdSpec,
    pub identify: IdentifySpec,
}

/// Expected key sets per config section, for unknown-key warnings.
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    (
        "",
        &["schema", "name", "graph", "model", "simulation", "dmd", "identify"],
    ),
    ("graph", &["generator", "n", "p_edge", "seed"]),
    ("model", &["preset", "a", "b", "c"]),
    ("simulation", &["q", "k", "K", "dt", "width", "substeps"]),
    ("dmd", &["c", "svd_tol", "selector", "centering"]),
    (
        "identify",
        &["epsilon", "method", "k_max", "delta", "lambda2_refined"],
    ),
];

fn collect_unknown_keys(value: &serde_json::Value) -> Vec<String> {
    let mut out = Vec::new();
    for (section, known) in KNOWN_KEYS {
        let obj = if section.is_empty() {
            value.as_object()
        } else {
            value.get(section).and_then(|v| v.as_object())
        };
        if let Some(map) = obj {
            for key in map.keys() {
                if !known.contains(&key.as_str()) {
                    let path = if section.is_empty() {
                        key.clone()
                    } else {
                        format!("{section}.{key}")
                    };
                    out.push(path);
                }
            }
        }
    }
    out
}

impl ExperimentConfig {
    /// Parses a config document, returning warnings for unknown keys and
    /// the inert `delta` field. Validation is included.
    pub fn from_json_str(text: &str) -> Result<(ExperimentConfig, Vec<String>)> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let mut warnings: Vec<String> = collect_unknown_keys(&value)
            .into_iter()
            .map(|k| format!("unknown config key {k:?} ignored"))
            .collect();
        let config: ExperimentConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("config does not match the schema: {e}")))?;
        if config.identify.delta.is_some() {
            warnings.push("config field identify.delta is parsed but not used".into());
        }
        config.validate()?;
        Ok((config, warnings))
    }

    pub fn from_file(path: &Path) -> Result<(ExperimentConfig, Vec<String>)> {
        let text = std::fs::read_to_string(path)
            .map_err(|_| Error::MissingArtifact(path.to_path_buf()))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.schema != 1 {
            return fail(format!("unsupported schema version {}", self.schema));
        }
        if self.graph.n == 0 {
            return fail("graph.n must be at least 1".into());
        }
        match self.graph.generator {
            GraphGenerator::ErdosRenyi => match self.graph.p_edge {
                None => return fail("graph.p_edge is required for the erdos_renyi generator".into()),
                Some(p) if !(0.0..=1.0).contains(&p) => {
                    return fail(format!("graph.p_edge must lie in [0, 1], got {p}"))
                }
                _ => {}
            },
            GraphGenerator::DenseUniform => {}
        }
        if let ModelSpec::CustomLinear { a, b, c } = &self.model {
            let m = a.len();
            if m == 0 || a.iter().any(|row| row.len() != m) {
                return fail("model.a must be a nonempty square matrix".into());
            }
            let r = b.first().map_or(0, |row| row.len());
            if b.len() != m || r == 0 || b.iter().any(|row| row.len() != r) {
                return fail("model.b must be unit-dim x outputs with outputs >= 1".into());
            }
            if c.len() != m || c.iter().any(|row| row.len() != r) {
                return fail("model.c must have the same shape as model.b".into());
            }
        }
        if self.simulation.q == 0 {
            return fail("simulation.q must be at least 1".into());
        }
        if self.simulation.k == 0 {
            return fail("simulation.k must be at least 1".into());
        }
        if !(self.simulation.dt > 0.0) {
            return fail(format!("simulation.dt must be positive, got {}", self.simulation.dt));
        }
        if self.simulation.width < 0.0 {
            return fail(format!(
                "simulation.width must be nonnegative, got {}",
                self.simulation.width
            ));
        }
        if self.simulation.substeps == 0 {
            return fail("simulation.substeps must be at least 1".into());
        }
        if self.dmd.c == 0 {
            return fail("dmd.c must be at least 1".into());
        }
        if self.simulation.k < self.dmd.c {
            return fail(format!(
                "simulation.k = {} is too short for dmd.c = {} delays",
                self.simulation.k, self.dmd.c
            ));
        }
        if !(self.dmd.svd_tol > 0.0) || self.dmd.svd_tol >= 1.0 {
            return fail(format!("dmd.svd_tol must lie in (0, 1), got {}", self.dmd.svd_tol));
        }
        if self.dmd.selector.is_empty() {
            return fail("dmd.selector must name at least one coordinate".into());
        }
        if !(self.identify.epsilon > 0.0) {
            return fail(format!(
                "identify.epsilon must be positive, got {}",
                self.identify.epsilon
            ));
        }
        if self.identify.k_max == 0 {
            return fail("identify.k_max must be at least 1".into());
        }
        Ok(())
    }
}
