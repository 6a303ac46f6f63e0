//! Run configuration: one TOML file with a section per subcommand, plus
//! `--set key=value` overrides applied to the raw table before validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use pslab::random_weyl::{ExperimentConfig, Torus2dConfig};
use pslab::symbol::SymbolSpec;

use crate::manifest::Artifact;

/// A configuration problem; always exit status 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub re: [f64; 2],
    pub im: [f64; 2],
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { re: [-1.5, 1.5], im: [-1.2, 1.2], nx: 61, ny: 49 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PseudospecConfig {
    pub symbol: SymbolSpec,
    pub h: f64,
    pub k: usize,
    pub grid: GridConfig,
    pub eps: Vec<f64>,
    pub svg_width: f64,
}

impl Default for PseudospecConfig {
    fn default() -> Self {
        Self {
            symbol: SymbolSpec::default(),
            h: 0.1,
            k: 40,
            grid: GridConfig::default(),
            eps: vec![1e-2, 1e-4, 1e-6, 1e-8],
            svg_width: 640.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuasimodeConfig {
    pub symbol: SymbolSpec,
    /// `[re, im]`.
    pub z: [f64; 2],
    pub h_list: Vec<f64>,
    /// Truncation `K = ceil(k_factor/h)`.
    pub k_factor: f64,
    /// `"default"`, `"wide"` or a number.
    pub radius: RadiusChoice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusChoice {
    Named(String),
    Value(f64),
}

impl Default for QuasimodeConfig {
    fn default() -> Self {
        Self {
            symbol: SymbolSpec::default(),
            z: [0.0, 0.5],
            h_list: vec![0.1, 0.05, 0.025],
            k_factor: 8.0,
            radius: RadiusChoice::Named("wide".into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrushinMapConfig {
    pub symbol: SymbolSpec,
    pub h: f64,
    pub k: usize,
    pub grid: GridConfig,
}

impl Default for GrushinMapConfig {
    fn default() -> Self {
        Self {
            symbol: SymbolSpec::default(),
            h: 0.1,
            k: 40,
            grid: GridConfig { re: [-1.0, 1.0], im: [0.6, 1.4], nx: 20, ny: 20 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DbarConfig {
    pub symbol: SymbolSpec,
    pub h: f64,
    pub k: usize,
    pub points: Vec<[f64; 2]>,
    pub steps: Vec<f64>,
    /// `[re, im]` for the symplectic-density comparison; empty to skip.
    pub density_point: Vec<f64>,
    pub density_step: f64,
}

impl Default for DbarConfig {
    fn default() -> Self {
        Self {
            symbol: SymbolSpec::default(),
            h: 0.1,
            k: 40,
            points: vec![[0.1, 0.8], [-0.2, 0.7]],
            steps: vec![1e-3, 5e-4],
            density_point: vec![0.0, 0.5],
            density_step: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZeroCountConfig {
    /// Zeros of the polynomial fixture, `[re, im]`.
    pub roots: Vec<[f64; 2]>,
    /// Zero-free factor `exp(a z² + b z)`, `[[re_a, im_a], [re_b, im_b]]`.
    pub exp_factor: Option<[[f64; 2]; 2]>,
    pub center: [f64; 2],
    pub radius: f64,
    pub nodes: usize,
    pub refinement_limit: usize,
}

impl Default for ZeroCountConfig {
    fn default() -> Self {
        Self {
            roots: vec![[0.2, 0.1], [-0.5, 0.4], [0.1, -0.7], [1.4, 0.2]],
            exp_factor: None,
            center: [0.0, 0.0],
            radius: 1.0,
            nodes: 128,
            refinement_limit: 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HagerConfig {
    pub h_list: Vec<f64>,
    pub c_cal: f64,
}

impl Default for HagerConfig {
    fn default() -> Self {
        Self { h_list: vec![0.04, 0.02, 0.01], c_cal: pslab::zero_count::LATTICE_C_CAL }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub n: usize,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub guard: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n: 240,
            lambdas: vec![10.0, 20.0, 40.0, 80.0],
            mus: vec![-1.0, 0.0, 2.0, 4.0, 8.0, 16.0],
            guard: pslab::boundary::DEFAULT_GUARD,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RescaleConfig {
    /// `[λ, μ]` pairs.
    pub cases: Vec<[f64; 2]>,
    pub n: usize,
    pub k: usize,
}

impl Default for RescaleConfig {
    fn default() -> Self {
        Self { cases: vec![[1.0, 0.5], [20.0, 0.0], [20.0, 3.0]], n: 80, k: 400 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailConfig {
    pub sigmas: Vec<f64>,
    pub xs: Vec<f64>,
    pub samples: usize,
}

impl Default for TailConfig {
    fn default() -> Self {
        Self { sigmas: vec![1.0; 5], xs: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0], samples: 100_000 }
    }
}

/// The whole configuration file. Manifests are valid configuration files
/// too: they carry the extra `version`, `subcommand` and `artifacts` keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub version: Option<String>,
    pub subcommand: Option<String>,
    pub artifacts: Vec<Artifact>,
    pub pseudospec: PseudospecConfig,
    pub quasimode: QuasimodeConfig,
    pub grushin_map: GrushinMapConfig,
    pub dbar_check: DbarConfig,
    pub weyl_mc: ExperimentConfig,
    pub weyl_2d: Torus2dConfig,
    pub zero_count: ZeroCountConfig,
    pub hager_verify: HagerConfig,
    pub resolvent_scan: ScanConfig,
    pub rescale_check: RescaleConfig,
    pub tail_bound_mc: TailConfig,
}

pub fn read_table(path: &Path) -> Result<Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    text.parse::<Table>().map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn parse_value(raw: &str) -> Value {
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Applies `a.b.c=value`; the value is read as TOML, falling back to a string.
pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("--set expects key=value, got '{assignment}'")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError(format!("--set: malformed key path '{path}'")));
    }
    let mut cur = table;
    for (i, key) in keys[..keys.len() - 1].iter().enumerate() {
        let entry = cur.entry(key.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("--set: '{}' is not a table", keys[..=i].join("."))))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Deserializes with the offending key path in the error message.
pub fn resolve(table: Table) -> Result<RunConfig, ConfigError> {
    let de = Value::Table(table);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError(format!("at '{path}': {}", e.into_inner()))
    })
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => read_table(p)?,
        None => Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    resolve(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_key_paths() {
        let mut t = Table::new();
        apply_override(&mut t, "weyl_mc.trials=3").unwrap();
        apply_override(&mut t, "weyl_mc.h_list=[0.1, 0.05]").unwrap();
        apply_override(&mut t, "pseudospec.symbol.builtin=shifted_cos").unwrap();
        let cfg = resolve(t).unwrap();
        assert_eq!(cfg.weyl_mc.trials, 3);
        assert_eq!(cfg.weyl_mc.h_list, vec![0.1, 0.05]);
        assert_eq!(cfg.pseudospec.symbol.builtin.as_deref(), Some("shifted_cos"));

        let mut bad = Table::new();
        apply_override(&mut bad, "weyl_mc.trails=3").unwrap();
        let err = resolve(bad).unwrap_err().0;
        assert!(err.contains("weyl_mc"), "{err}");
        assert!(err.contains("trails"), "{err}");

        let mut wrong = Table::new();
        apply_override(&mut wrong, "weyl_mc.region.bounds=\"wide\"").unwrap();
        assert!(resolve(wrong).unwrap_err().0.contains("weyl_mc.region.bounds"));
        assert!(apply_override(&mut Table::new(), "novalue").is_err());
    }

    #[test]
    fn empty_config_is_all_defaults() {
        let cfg = resolve(Table::new()).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }
}
