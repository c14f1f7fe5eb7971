use std::path::Path;

use drs_inekf::filter::FilterConfig;
use drs_inekf::harness::{Scenario, TrialConfig};
use drs_inekf::models::NoiseParams;
use drs_inekf::sim::{GaitConfig, Rates, SurfaceConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run reads from `--config`. Missing fields take their defaults;
/// unknown fields are rejected. 3×3 covariances are 9 column-major reals,
/// 12×12 ones 144.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gait: GaitConfig,
    /// Surface for `sim` and the main Monte Carlo run.
    pub surface: SurfaceConfig,
    /// Surface for the Monte Carlo control run.
    pub control_surface: ControlSurface,
    pub rates: Rates,
    /// Noise the simulator injects.
    pub sensor_noise: NoiseParams,
    pub filter: FilterConfig,
    pub trials: TrialConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlSurface(pub SurfaceConfig);

impl Default for ControlSurface {
    fn default() -> Self {
        ControlSurface(SurfaceConfig::level())
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                CliError::Config(e.into_inner().to_string())
            } else {
                CliError::Config(format!("field `{path}`: {}", e.into_inner()))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario().validate()?;
        self.control_scenario().surface.validate().map_err(|e| e.in_section("control_surface"))?;
        self.trials.validate()?;
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            gait: self.gait.clone(),
            surface: self.surface.clone(),
            rates: self.rates.clone(),
            sensor_noise: self.sensor_noise.clone(),
            filter: self.filter.clone(),
        }
    }

    pub fn control_scenario(&self) -> Scenario {
        Scenario {
            surface: self.control_surface.0.clone(),
            ..self.scenario()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
