//! Experiment suites: named environments plus a list of pinned runs.

use super::{ControllerKind, ExperimentParams, Variant};
use crate::safety::SensorSpec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub fov_deg: f64,
    pub range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            fov_deg: 45.0,
            range: 3.0,
        }
    }
}

impl SensorConfig {
    pub fn spec(&self) -> SensorSpec {
        SensorSpec::from_degrees(self.fov_deg, self.range)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub env: String,
    pub controller: ControllerKind,
    pub variant: Variant,
    pub seed: u64,
    pub max_iter: usize,
    #[serde(default)]
    pub fov_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    /// Environment name to world file, relative to the suite file.
    pub envs: BTreeMap<String, String>,
    #[serde(default)]
    pub sensor: SensorConfig,
    #[serde(default)]
    pub params: ExperimentParams,
    #[serde(rename = "run")]
    pub runs: Vec<RunSpec>,
}

impl Suite {
    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn run(&self, name: &str) -> Option<&RunSpec> {
        self.runs.iter().find(|r| r.name == name)
    }

    pub fn params_for(&self, run: &RunSpec) -> ExperimentParams {
        let mut params = self.params;
        params.planner.seed = run.seed;
        params.planner.max_iter = run.max_iter;
        params
    }

    pub fn sensor_for(&self, run: &RunSpec) -> SensorSpec {
        SensorConfig {
            fov_deg: run.fov_deg.unwrap_or(self.sensor.fov_deg),
            ..self.sensor
        }
        .spec()
    }
}
