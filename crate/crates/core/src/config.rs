//! Campaign configuration with precedence flags > environment (`QP_*`)
//! > config file (TOML) > built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::ProtocolType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendChoice {
    Live,
    Scripted(PathBuf),
}

impl BackendChoice {
    pub fn parse(text: &str) -> Result<BackendChoice> {
        if text == "live" {
            Ok(BackendChoice::Live)
        } else if let Some(path) = text.strip_prefix("scripted:") {
            if path.is_empty() {
                Err(Error::Config("scripted backend needs a transcript path".into()))
            } else {
                Ok(BackendChoice::Scripted(PathBuf::from(path)))
            }
        } else {
            Err(Error::Config(format!("unknown backend `{text}` (expected live or scripted:FILE)")))
        }
    }
}

impl std::fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendChoice::Live => write!(f, "live"),
            BackendChoice::Scripted(path) => write!(f, "scripted:{}", path.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    #[serde(default)]
    pub no_bug_exploitation: bool,
    #[serde(default)]
    pub no_state_analyzer: bool,
    #[serde(default)]
    pub no_constraints_analyzer: bool,
    #[serde(default)]
    pub no_scenario_generator: bool,
    #[serde(default)]
    pub no_reflection_loop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub repo: PathBuf,
    pub protocol_type: ProtocolType,
    pub backend: BackendChoice,
    pub budget_hours: f64,
    pub token_limit: Option<u64>,
    pub scenario_limit: Option<u64>,
    pub num_iter: usize,
    pub temperature: f64,
    pub state_dir: PathBuf,
    pub out_dir: PathBuf,
    pub ablations: Ablations,
}

impl CampaignConfig {
    pub fn wall_clock_limit(&self) -> Option<Duration> {
        (self.budget_hours > 0.0)
            .then(|| Duration::from_secs_f64(self.budget_hours * 3600.0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.repo.as_os_str().is_empty() {
            return Err(Error::Config("--repo is required".into()));
        }
        if self.wall_clock_limit().is_none()
            && self.token_limit.is_none()
            && self.scenario_limit.is_none()
        {
            return Err(Error::Config(
                "budget allows no work: set --budget-hours > 0 or another limit".into(),
            ));
        }
        if self.num_iter == 0 {
            return Err(Error::Config("--num-iter must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(Error::Config("--temperature must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One layer of settings; every field optional so layers merge.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct PartialConfig {
    pub repo: Option<PathBuf>,
    pub protocol_type: Option<String>,
    pub backend: Option<String>,
    pub budget_hours: Option<f64>,
    pub token_limit: Option<u64>,
    pub scenario_limit: Option<u64>,
    pub num_iter: Option<usize>,
    pub temperature: Option<f64>,
    pub state_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub ablations: Option<Ablations>,
}

impl PartialConfig {
    pub fn from_toml_file(path: &Path) -> Result<PartialConfig> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Reads the `QP_*` environment layer from a key→value map (the real
    /// environment in production, a fixture in tests).
    pub fn from_env_map(env: &BTreeMap<String, String>) -> Result<PartialConfig> {
        let get = |key: &str| env.get(key).cloned();
        let parse_num = |key: &str| -> Result<Option<u64>> {
            get(key)
                .map(|v| v.parse().map_err(|_| Error::Config(format!("{key} must be an integer"))))
                .transpose()
        };
        let parse_f64 = |key: &str| -> Result<Option<f64>> {
            get(key)
                .map(|v| v.parse().map_err(|_| Error::Config(format!("{key} must be a number"))))
            .transpose()
        };
        Ok(PartialConfig {
            repo: get("QP_REPO").map(PathBuf::from),
            protocol_type: get("QP_PROTOCOL_TYPE"),
            backend: get("QP_BACKEND"),
            budget_hours: parse_f64("QP_BUDGET_HOURS")?,
            token_limit: parse_num("QP_TOKEN_LIMIT")?,
            scenario_limit: parse_num("QP_SCENARIO_LIMIT")?,
            num_iter: parse_num("QP_NUM_ITER")?.map(|n| n as usize),
            temperature: parse_f64("QP_TEMPERATURE")?,
            state_dir: get("QP_STATE_DIR").map(PathBuf::from),
            out_dir: get("QP_OUT_DIR").map(PathBuf::from),
            ablations: None,
        })
    }

    pub fn from_process_env() -> Result<PartialConfig> {
        let env: BTreeMap<String, String> = std::env::vars().collect();
        PartialConfig::from_env_map(&env)
    }

    /// `self` wins over `weaker` field by field.
    pub fn over(self, weaker: PartialConfig) -> PartialConfig {
        PartialConfig {
            repo: self.repo.or(weaker.repo),
            protocol_type: self.protocol_type.or(weaker.protocol_type),
            backend: self.backend.or(weaker.backend),
            budget_hours: self.budget_hours.or(weaker.budget_hours),
            token_limit: self.token_limit.or(weaker.token_limit),
            scenario_limit: self.scenario_limit.or(weaker.scenario_limit),
            num_iter: self.num_iter.or(weaker.num_iter),
            temperature: self.temperature.or(weaker.temperature),
            state_dir: self.state_dir.or(weaker.state_dir),
            out_dir: self.out_dir.or(weaker.out_dir),
            ablations: self.ablations.or(weaker.ablations),
        }
    }

    /// Applies defaults and validates the result.
    pub fn finish(self) -> Result<CampaignConfig> {
        let repo = self.repo.ok_or_else(|| Error::Config("--repo is required".into()))?;
        let out_dir = self.out_dir.unwrap_or_else(|| PathBuf::from("campaign-out"));
        let config = CampaignConfig {
            repo,
            protocol_type: self
                .protocol_type
                .as_deref()
                .map(ProtocolType::parse)
                .transpose()?
                .unwrap_or(ProtocolType::Cft),
            backend: self
                .backend
                .as_deref()
                .map(BackendChoice::parse)
                .transpose()?
                .unwrap_or(BackendChoice::Live),
            budget_hours: self.budget_hours.unwrap_or(3.0),
            token_limit: self.token_limit,
            scenario_limit: self.scenario_limit,
            num_iter: self.num_iter.unwrap_or(50),
            temperature: self.temperature.unwrap_or(crate::gateway::DEFAULT_TEMPERATURE),
            state_dir: self.state_dir.unwrap_or_else(|| out_dir.join("state")),
            out_dir,
            ablations: self.ablations.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Resolves the full precedence chain.
pub fn resolve(
    flags: PartialConfig,
    env: &BTreeMap<String, String>,
    config_file: Option<&Path>,
) -> Result<CampaignConfig> {
    let file_layer = match config_file {
        Some(path) => PartialConfig::from_toml_file(path)?,
        None => PartialConfig::default(),
    };
    flags.over(PartialConfig::from_env_map(env)?).over(file_layer).finish()
}
