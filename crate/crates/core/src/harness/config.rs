//! Experiment configuration: a structured file (TOML or JSON) mirroring the
//! network, intensity model, truth, scales and estimator selection.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::estimators::PreliminaryDetectors;
use crate::geometry::{Point2, Region, SensorNetwork};
use crate::intensity::IntensityModel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub sensors: Vec<[f64; 2]>,
    pub nu: f64,
    #[serde(rename = "T")]
    pub t_horizon: f64,
    pub lambda0: f64,
    pub theta_region: Region,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntensityConfig {
    /// Only `power_law` is expressible in a config file; tabulated shapes
    /// are a library-level feature.
    pub kind: String,
    pub a: f64,
    pub kappa: f64,
}

/// Estimators the harness can run per replication.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mle,
    Be,
    Lse,
    Onestep,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Be => "be",
            Method::Lse => "lse",
            Method::Onestep => "onestep",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_thinning_b() -> f64 {
    0.4
}

fn default_preliminary() -> PreliminaryDetectors {
    PreliminaryDetectors::All
}

fn default_replications() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub network: NetworkConfig,
    pub intensity: IntensityConfig,
    /// True source position used by `simulate` and `experiment`.
    pub truth: [f64; 2],
    /// Intensity scales to run, one experiment leg per entry.
    pub scales: Vec<u64>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub methods: Vec<Method>,
    /// Thinning exponent for the One-step pipeline (`p = n^-b`).
    #[serde(default = "default_thinning_b")]
    pub thinning_b: f64,
    /// Time grid for the One-step estimator process (CLI `estimate --method
    /// onestep` with no `--t` uses the horizon).
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_preliminary")]
    pub onestep_preliminary: PreliminaryDetectors,
}

impl ExperimentConfig {
    /// Parses TOML or JSON depending on the file extension, falling back to
    /// trying both.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let by_ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
        let parsed = match by_ext {
            "toml" => toml::from_str(&text).map_err(|e| e.to_string()),
            "json" => serde_json::from_str(&text).map_err(|e| e.to_string()),
            _ => toml::from_str(&text)
                .map_err(|e| e.to_string())
                .or_else(|toml_err| {
                    serde_json::from_str(&text)
                        .map_err(|json_err| format!("not TOML ({toml_err}) nor JSON ({json_err})"))
                }),
        };
        let cfg: ExperimentConfig = parsed.map_err(|msg| HarnessError::ConfigFile {
            path: path.display().to_string(),
            msg,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.scales.is_empty() {
            return Err(HarnessError::Config("scales must not be empty".into()));
        }
        if self.scales.iter().any(|&n| n == 0) {
            return Err(HarnessError::Config("scales must be positive".into()));
        }
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.intensity.kind != "power_law" {
            return Err(HarnessError::Config(format!(
                "unknown intensity kind '{}' (config files support power_law)",
                self.intensity.kind
            )));
        }
        let net = self.build_network()?;
        if !net.theta_region().contains(self.truth_point()) {
            return Err(HarnessError::Config(
                "truth must lie inside theta_region".into(),
            ));
        }
        Ok(())
    }

    pub fn truth_point(&self) -> Point2 {
        Point2::new(self.truth[0], self.truth[1])
    }

    /// Builds and validates the sensor network (including the `beta_j < T`
    /// horizon check and non-collinearity).
    pub fn build_network(&self) -> Result<SensorNetwork, HarnessError> {
        let sensors = self
            .network
            .sensors
            .iter()
            .map(|&[x, y]| Point2::new(x, y))
            .collect();
        Ok(SensorNetwork::new(
            sensors,
            self.network.nu,
            self.network.t_horizon,
            self.network.lambda0,
            self.network.theta_region,
        )?)
    }

    pub fn build_model(&self) -> IntensityModel {
        IntensityModel::power_law(self.intensity.a, self.intensity.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_toml() -> &'static str {
        r#"
truth = [0.3, 0.4]
scales = [100]
replications = 4
seed = 7
methods = ["mle", "lse"]

[network]
sensors = [[-1.0, -1.0], [2.0, -1.0], [2.0, 2.0], [-1.0, 2.0]]
nu = 1.0
T = 6.0
lambda0 = 1.0
theta_region = { x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0 }

[intensity]
kind = "power_law"
a = 3.0
kappa = 2.0
"#
    }

    #[test]
    fn toml_and_json_agree() {
        let from_toml: ExperimentConfig = toml::from_str(reference_toml()).unwrap();
        from_toml.validate().unwrap();
        let json = serde_json::to_string(&from_toml).unwrap();
        let from_json: ExperimentConfig = serde_json::from_str(&json).unwrap();
        from_json.validate().unwrap();
        assert_eq!(from_json.network.sensors, from_toml.network.sensors);
        assert_eq!(from_json.methods, vec![Method::Mle, Method::Lse]);
        assert_eq!(from_json.thinning_b, 0.4);
        assert_eq!(from_json.onestep_preliminary, PreliminaryDetectors::All);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg: ExperimentConfig = toml::from_str(reference_toml()).unwrap();
        cfg.truth = [2.0, 2.0];
        assert!(cfg.validate().is_err());

        let mut cfg: ExperimentConfig = toml::from_str(reference_toml()).unwrap();
        cfg.scales.clear();
        assert!(cfg.validate().is_err());

        let mut cfg: ExperimentConfig = toml::from_str(reference_toml()).unwrap();
        cfg.intensity.kind = "gaussian".into();
        assert!(cfg.validate().is_err());

        // horizon shorter than the worst-case arrival
        let mut cfg: ExperimentConfig = toml::from_str(reference_toml()).unwrap();
        cfg.network.t_horizon = 2.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn files_load_by_extension() {
        let dir = std::env::temp_dir().join(format!("plcfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let toml_path = dir.join("c.toml");
        std::fs::write(&toml_path, reference_toml()).unwrap();
        let cfg = ExperimentConfig::load(&toml_path).unwrap();
        let json_path = dir.join("c.json");
        std::fs::write(&json_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
        let cfg2 = ExperimentConfig::load(&json_path).unwrap();
        assert_eq!(cfg2.seed, 7);
        std::fs::remove_dir_all(&dir).ok();
    }
}
