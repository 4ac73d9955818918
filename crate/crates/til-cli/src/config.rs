//! Run configuration: one TOML file shared by every subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use til_core::observer::{GainBounds, GainName, GainSet, Param, Stage, StageSchedule};
use til_core::scenario::ScenarioConfig;
use til_core::sweep::SweepSpec;
use til_core::tuner::BoConfig;
use til_core::twin::ParamDeviation;

use crate::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub observer: ObserverSection,
    pub estimate: EstimateSection,
    pub tune: TuneSection,
    pub sweep: Option<SweepSpec>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObserverSection {
    /// Gain file, relative to the config file. Recommended gains when absent.
    pub gains: Option<PathBuf>,
    /// Stage schedule. The three-stage default when absent.
    pub stage: Option<Vec<Stage>>,
    pub initial: ParamDeviation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSection {
    pub params: Vec<Param>,
    /// One table row per condition and parameter.
    pub conditions: Vec<Condition>,
}

impl Default for EstimateSection {
    fn default() -> Self {
        Self { params: vec![Param::Mass], conditions: Vec::new() }
    }
}

/// Named override of the base scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub name: String,
    #[serde(default)]
    pub scenario: toml::Table,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverKind {
    #[default]
    Til,
    Benchmark,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneSection {
    pub observer: ObserverKind,
    /// Gains varied by the tuner; the planar six when absent.
    pub names: Option<Vec<GainName>>,
    /// Overrides of the default gain box.
    pub bounds: GainBounds,
    /// Optimizer settings. `seed` and `bounds` are filled in by the harness.
    pub bo: BoConfig,
}

impl TuneSection {
    pub fn names(&self) -> Vec<GainName> {
        self.names.clone().unwrap_or_else(|| GainName::TIL_THETA.to_vec())
    }

    pub fn gain_bounds(&self) -> GainBounds {
        let mut b = GainBounds::default();
        b.0.extend(self.bounds.0.iter().map(|(k, v)| (*k, *v)));
        b
    }
}

/// A parsed config together with its location and raw text.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub path: PathBuf,
    pub text: String,
    pub config: RunConfig,
    raw_scenario: toml::Table,
}

impl Loaded {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        config.scenario.validate().map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let table: toml::Table = toml::from_str(&text).expect("parsed above");
        let raw_scenario = match table.get("scenario") {
            Some(toml::Value::Table(t)) => t.clone(),
            _ => toml::Table::new(),
        };
        let path = std::path::absolute(path).map_err(|e| CliError::usage(e.to_string()))?;
        Ok(Self { path, text, config, raw_scenario })
    }

    fn dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn gains_path(&self) -> Option<PathBuf> {
        self.config.observer.gains.as_ref().map(|g| self.dir().join(g))
    }

    /// Observer gains, or the recommended set when no file is configured.
    pub fn gains(&self) -> Result<GainSet, CliError> {
        let Some(path) = self.gains_path() else { return Ok(GainSet::recommended()) };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::usage(format!("cannot read gains file {}: {e}", path.display())))?;
        GainSet::from_toml(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn schedule(&self) -> Result<StageSchedule, CliError> {
        let s = match &self.config.observer.stage {
            Some(stage) => StageSchedule { stage: stage.clone() },
            None => StageSchedule::default(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Base scenario with `seed`.
    pub fn scenario(&self, seed: u64) -> ScenarioConfig {
        ScenarioConfig { seed, ..self.config.scenario.clone() }
    }

    /// Base scenario with a condition's keys merged over it.
    pub fn condition(&self, c: &Condition, seed: u64) -> Result<ScenarioConfig, CliError> {
        let mut t = self.raw_scenario.clone();
        merge(&mut t, &c.scenario);
        let mut cfg: ScenarioConfig = toml::Value::Table(t)
            .try_into()
            .map_err(|e| CliError::usage(format!("condition '{}': {e}", c.name)))?;
        cfg.seed = seed;
        cfg.validate().map_err(|e| CliError::usage(format!("condition '{}': {e}", c.name)))?;
        Ok(cfg)
    }
}

/// Recursive table merge, `over` wins.
fn merge(base: &mut toml::Table, over: &toml::Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_deep() {
        let mut a: toml::Table = toml::from_str("kind = 'urban'\n[noise]\nsnr = 5.0\nroad_eps = 0.1\n").unwrap();
        let b: toml::Table = toml::from_str("[noise]\nsnr = 20.0\n").unwrap();
        merge(&mut a, &b);
        assert_eq!(a["noise"]["snr"].as_float(), Some(20.0));
        assert_eq!(a["noise"]["road_eps"].as_float(), Some(0.1));
        assert_eq!(a["kind"].as_str(), Some("urban"));
    }

    #[test]
    fn bound_overrides_keep_defaults() {
        let t: TuneSection = toml::from_str("[bounds]\nk_ax_dm = [-5.0, 0.0]\n").unwrap();
        let b = t.gain_bounds();
        assert_eq!(b.get(GainName::KAxDm), (-5.0, 0.0));
        assert_eq!(b.get(GainName::KWheel), GainBounds::default().get(GainName::KWheel));
    }
}
