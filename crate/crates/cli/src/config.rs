//! Experiment configuration: a TOML file with dotted-path command-line
//! overrides (for example `--agent.gamma=0.95`).

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use pikan_core::agents::{AgentConfig, Algorithm};
use pikan_core::baselines::BaselineParams;
use pikan_core::marketdata::IndicatorParams;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    /// One CSV per asset with columns date,open,high,low,close,volume.
    pub assets: Vec<PathBuf>,
    /// Where `ingest` writes feature files and the manifest.
    pub feature_store: PathBuf,
    #[serde(default = "default_window")]
    pub window: usize,
    pub train_start: NaiveDate,
    pub train_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
}

fn default_window() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvConfig {
    #[serde(default = "default_commission")]
    pub commission: f64,
    #[serde(default = "default_wealth")]
    pub initial_wealth: f64,
}

fn default_commission() -> f64 {
    0.0025
}

fn default_wealth() -> f64 {
    1000.0
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            commission: default_commission(),
            initial_wealth: default_wealth(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub total_steps: usize,
    pub checkpoint_every: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub env: EnvConfig,
    pub train: TrainSection,
    /// Fully resolved agent configuration; absent when the file has no
    /// [agent] section.
    pub agent: Option<AgentConfig>,
    pub baselines: BaselineParams,
    pub indicators: IndicatorParams,
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    data: DataConfig,
    #[serde(default)]
    env: EnvConfig,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    baselines: Option<BaselineParams>,
    #[serde(default)]
    indicators: Option<IndicatorParams>,
}

/// Parse `key.path=value` strings and apply them onto the TOML document.
fn apply_overrides(doc: &mut toml::Value, overrides: &[String]) -> Result<(), CliError> {
    for entry in overrides {
        let (path, value) = entry
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("override '{entry}' is not key=value")))?;
        let parsed: toml::Value = value
            .parse::<toml::Value>()
            .unwrap_or_else(|_| toml::Value::String(value.to_string()));
        let mut slot = &mut *doc;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot.as_table_mut().ok_or_else(|| {
                CliError::Validation(format!("override '{path}' traverses a non-table"))
            })?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), parsed.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
    }
    Ok(())
}

/// Merge `overlay` into `base` recursively (tables merge, scalars replace).
fn merge(base: &mut toml::Value, overlay: &toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config '{}': {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| CliError::Validation(format!("config parse error: {e}")))?;
        let mut doc = toml::Value::Table(table);
        apply_overrides(&mut doc, overrides)?;

        // the [agent] section overlays per-algorithm defaults; a top-level
        // [physics] section overlays agent.physics
        let agent = match doc.get("agent") {
            None => None,
            Some(section) => {
                let algorithm_name = section
                    .get("algorithm")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| {
                        CliError::Validation("[agent] section needs an 'algorithm' key".into())
                    })?;
                let algorithm = Algorithm::parse(algorithm_name).ok_or_else(|| {
                    CliError::Validation(format!("unknown algorithm '{algorithm_name}'"))
                })?;
                let defaults = AgentConfig::defaults_for(algorithm);
                let mut value = toml::Value::try_from(&defaults)
                    .map_err(|e| CliError::Runtime(format!("default serialization: {e}")))?;
                merge(&mut value, section);
                if let Some(physics) = doc.get("physics") {
                    let slot = value
                        .as_table_mut()
                        .unwrap()
                        .entry("physics".to_string())
                        .or_insert_with(|| toml::Value::Table(Default::default()));
                    merge(slot, physics);
                }
                let mut agent: AgentConfig = value
                    .try_into()
                    .map_err(|e| CliError::Validation(format!("[agent] section: {e}")))?;
                if section.get("seed").is_none() {
                    if let Some(seed) = doc.get("seed").and_then(|v| v.as_integer()) {
                        agent.seed = seed as u64;
                    }
                }
                Some(agent)
            }
        };

        let raw: RawConfig = doc
            .clone()
            .try_into()
            .map_err(|e| CliError::Validation(format!("config: {e}")))?;
        let cfg = Self {
            seed: raw.seed.unwrap_or(0),
            output_dir: resolve_output_dir(raw.output_dir.unwrap_or_else(|| PathBuf::from("runs/out"))),
            data: raw.data,
            env: raw.env,
            train: raw.train,
            agent,
            baselines: raw.baselines.unwrap_or_default(),
            indicators: raw.indicators.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.data.assets.is_empty() {
            return Err(CliError::Validation("data.assets must not be empty".into()));
        }
        if self.data.window == 0 {
            return Err(CliError::Validation("data.window must be at least 1".into()));
        }
        if self.data.train_start > self.data.train_end || self.data.test_start > self.data.test_end
        {
            return Err(CliError::Validation("date ranges must be well ordered".into()));
        }
        // train and test ranges must be disjoint
        if self.data.train_end >= self.data.test_start && self.data.test_end >= self.data.train_start
        {
            return Err(CliError::Validation(
                "train and test date ranges overlap".into(),
            ));
        }
        if let Some(agent) = &self.agent {
            agent
                .validate()
                .map_err(|e| CliError::Validation(e.to_string()))?;
        }
        Ok(())
    }

    /// Agent section or a validation error naming the gap.
    pub fn require_agent(&self) -> Result<&AgentConfig, CliError> {
        self.agent
            .as_ref()
            .ok_or_else(|| CliError::Validation("config has no [agent] section".into()))
    }

    pub fn assets_must_exist(&self) -> Result<(), CliError> {
        for path in &self.data.assets {
            if !path.exists() {
                return Err(CliError::Validation(format!(
                    "asset file '{}' does not exist",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

/// `PIKAN_OUTPUT_ROOT`, when set, re-roots relative output directories.
fn resolve_output_dir(dir: PathBuf) -> PathBuf {
    match std::env::var_os("PIKAN_OUTPUT_ROOT") {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir,
    }
}
