//! JSON scenario configuration and the presets shipped with the crate.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::mdp::PolicyIterationConfig;
use crate::model::{Scenario, Topology, VnfType};
use crate::qlearning::{AgentConfig, EpsilonSchedule, TieBreak};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSettings {
    pub gamma: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QlSettings {
    pub alpha: f64,
    pub gamma: f64,
    pub eps_min: f64,
    pub eps_max: f64,
    pub eps_decay: f64,
    pub episodes: usize,
    pub seed: u64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub n_train: usize,
    pub n_eval: usize,
    pub n_requests: usize,
    pub base_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestFitSettings {
    pub seed: u64,
}

impl Default for BestFitSettings {
    fn default() -> Self {
        Self { seed: 7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub topology: Topology,
    pub vnf_types: Vec<VnfType>,
    pub pi: PiSettings,
    pub ql: QlSettings,
    pub files: FileSettings,
    #[serde(default)]
    pub bestfit: BestFitSettings,
}

const PRESETS: &[(&str, &str)] = &[
    ("table1", include_str!("../presets/table1.json")),
    ("table3_sim2", include_str!("../presets/table3_sim2.json")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(name, _)| *name)
}

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self> {
        Self::from_value(preset_value(name)?)
    }

    /// Reads `source` as a file path, falling back to a preset name, then
    /// applies `KEY=VALUE` overrides before validating.
    pub fn load(source: &str, overrides: &[String]) -> Result<Self> {
        let mut value = if Path::new(source).is_file() {
            serde_json::from_str(&std::fs::read_to_string(source)?)
                .map_err(|e| Error::Config(format!("{source}: {e}")))?
        } else {
            preset_value(source)?
        };
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let cfg: Self =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(self)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(value)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().map_err(|e| Error::Config(e.to_string()))?;
        self.agent_config().validate()?;
        if !(0.0..1.0).contains(&self.pi.gamma) || !(self.pi.theta > 0.0) {
            return Err(Error::Config(
                "pi.gamma must be in [0, 1) and pi.theta positive".into(),
            ));
        }
        let f = &self.files;
        if f.n_train == 0 || f.n_eval == 0 || f.n_requests == 0 {
            return Err(Error::Config(
                "files.n_train, n_eval and n_requests must be at least 1".into(),
            ));
        }
        if self.ql.episodes == 0 {
            return Err(Error::Config("ql.episodes must be at least 1".into()));
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.topology.clone(), self.vnf_types.clone())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            alpha: self.ql.alpha,
            gamma: self.ql.gamma,
            schedule: EpsilonSchedule {
                eps_min: self.ql.eps_min,
                eps_max: self.ql.eps_max,
                eps_decay: self.ql.eps_decay,
            },
            seed: self.ql.seed,
            tie_break: self.ql.tie_break,
        }
    }

    pub fn pi_config(&self) -> PolicyIterationConfig {
        PolicyIterationConfig::new(self.pi.gamma, self.pi.theta)
    }

    /// Training traces are seeded `base_seed ..`, evaluation traces follow
    /// directly after them.
    pub fn train_base_seed(&self) -> u64 {
        self.files.base_seed
    }

    pub fn eval_base_seed(&self) -> u64 {
        self.files.base_seed + self.files.n_train as u64
    }
}

fn preset_value(name: &str) -> Result<Value> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            Error::Config(format!(
                "`{name}` is neither a readable file nor a preset ({})",
                preset_names().collect::<Vec<_>>().join(", ")
            ))
        })?;
    Ok(serde_json::from_str(text)?)
}

/// Sets a dotted path such as `ql.alpha=0.9` or `topology.ecs.1.cpu=8`.
/// The value is parsed as JSON, falling back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not KEY=VALUE")))?;
    let new: Value =
        serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys
        .split_last()
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("empty override path in `{assignment}`")))?;

    let missing = || Error::Config(format!("override path `{path}` does not exist"));
    let mut node = root;
    for key in parents {
        node = match node {
            Value::Object(map) => map.get_mut(*key).ok_or_else(missing)?,
            Value::Array(items) => key
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get_mut(i))
                .ok_or_else(missing)?,
            _ => return Err(missing()),
        };
    }
    match node {
        Value::Object(map) => {
            map.insert((*last).to_string(), new);
        }
        Value::Array(items) => {
            let slot = last
                .parse::<usize>()
                .ok()
                .and_then(|i| items.get_mut(i))
                .ok_or_else(missing)?;
            *slot = new;
        }
        _ => return Err(missing()),
    }
    Ok(())
}
