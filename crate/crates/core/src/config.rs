//! Every tunable of the pipeline in one file-loadable structure.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::RenderStyle;
use crate::error::{Error, Result};
use crate::ingest::SyntheticSpec;
use crate::plg::PlgConfig;
use crate::policy::{ActionGrid, RiskBins};
use crate::ppo::TrainConfig;
use crate::sim::{SeedConfig, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// Look-back before a collision when counting lane changes, seconds.
    pub horizon: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { horizon: 5.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyFitConfig {
    pub grid: ActionGrid,
    pub bins: RiskBins,
    /// Laplace smoothing pseudo-count.
    pub alpha: f64,
}

impl Default for PolicyFitConfig {
    fn default() -> Self {
        Self {
            grid: ActionGrid::default(),
            bins: RiskBins::default(),
            alpha: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub synth: SyntheticSpec,
    pub plg: PlgConfig,
    pub policy: PolicyFitConfig,
    pub seeds: SeedConfig,
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub analysis: AnalysisConfig,
    pub render: RenderStyle,
}

impl RunConfig {
    /// TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.plg.validate()?;
        self.sim.validate()?;
        self.train.validate()?;
        if !(self.seeds.tau > 0.0) || !(self.analysis.horizon >= 0.0) || !(self.policy.alpha > 0.0) {
            return Err(Error::InvalidConfig(
                "tau and alpha must be > 0 and the analysis horizon >= 0".into(),
            ));
        }
        if self.render.window == 0 {
            return Err(Error::InvalidConfig("render window must be >= 1".into()));
        }
        Ok(())
    }
}
