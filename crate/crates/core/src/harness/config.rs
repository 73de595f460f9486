//! Run configuration: one TOML document mirroring every module's defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoscan::ScanConfig;
use crate::controller::ControllerConfig;
use crate::error::HarnessError;
use crate::robot_sim::PlantParams;
use crate::stiffness::gridding::{DEFAULT_LAMBDA, DEFAULT_STEP, DEFAULT_SUPPORT_RADIUS};
use crate::stiffness::{EstimatorConfig, ExcitationParams};
use crate::teleop::TeleopConfig;

use super::metrics::Containment;
use super::users::UserModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Grid spacing, mm.
    pub step: f64,
    pub lambda: f64,
    /// mm.
    pub support_radius: f64,
    /// Display refresh rate, Hz.
    pub update_rate: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            step: DEFAULT_STEP,
            lambda: DEFAULT_LAMBDA,
            support_radius: DEFAULT_SUPPORT_RADIUS,
            update_rate: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub trials: usize,
    /// Simulated seconds before a trial is recorded as incomplete.
    pub timeout_s: f64,
    /// Keep every n-th tick in the per-trial log; 0 disables tick logs.
    pub log_decimation: usize,
    pub containment: Containment,
    /// Membrane width × height used for the containment table, mm.
    pub male_membrane: [f64; 2],
    pub female_membrane: [f64; 2],
    pub alpha: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            trials: 10,
            timeout_s: 300.0,
            log_decimation: 10,
            containment: Containment::Ellipse,
            male_membrane: [13.0, 10.0],
            female_membrane: [10.5, 7.5],
            alpha: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantParams,
    pub controller: ControllerConfig,
    pub teleop: TeleopConfig,
    pub excitation: ExcitationParams,
    pub estimator: EstimatorConfig,
    pub map: MapConfig,
    pub scan: ScanConfig,
    pub user: UserModel,
    pub harness: HarnessConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is serializable")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.plant.validate()?;
        let checks = [
            self.controller.validate(),
            self.excitation.validate(),
            self.estimator.validate(),
            self.user.validate(),
        ];
        for c in checks {
            c.map_err(HarnessError::Config)?;
        }
        if !(self.map.step > 0.0 && self.map.lambda > 0.0 && self.map.update_rate > 0.0) {
            return Err(HarnessError::Config("map step, lambda and update_rate must be positive".into()));
        }
        if !(self.scan.speed > 0.0) {
            return Err(HarnessError::Config("scan speed must be positive".into()));
        }
        if !(self.teleop.scale > 0.0) {
            return Err(HarnessError::Config("teleop scale must be positive".into()));
        }
        let [mw, mh] = self.harness.male_membrane;
        let [fw, fh] = self.harness.female_membrane;
        if [mw, mh, fw, fh].iter().any(|v| !(*v > 0.0)) {
            return Err(HarnessError::Config("membrane sizes must be positive".into()));
        }
        Ok(())
    }
}
