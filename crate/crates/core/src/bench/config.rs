use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::DataShape;
use crate::error::{Error, Result};
use crate::lti::StateSpaceModel;
use crate::ocp::{BoxConstraints, RegWeights, RegulationObjective};
use crate::plant::{build_benchmark_model, BenchmarkParams};

/// Flat key-value run configuration, read from TOML.
///
/// ```toml
/// T = 150
/// T_values = [100, 150, 200]
/// T_ini = 4
/// N = 40
/// sigma_w = 0.01
/// lambda_g = 1.0
/// seeds = [0, 1, 2]
/// ```
///
/// Every key is optional; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inertia: f64,
    pub disc_spring: f64,
    pub motor_spring: f64,
    pub damping: f64,
    pub actuator_tau: f64,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "T_values")]
    pub t_values: Vec<usize>,
    #[serde(rename = "T_ini")]
    pub t_ini: usize,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "Q_scale")]
    pub q_scale: f64,
    #[serde(rename = "R_scale")]
    pub r_scale: f64,
    pub sigma_w: f64,
    pub lambda_g: f64,
    pub lambda_sigma: f64,
    pub u_bound: f64,
    /// Base seed of single runs.
    pub seed: u64,
    /// Repetition seeds of the table.
    pub seeds: Vec<u64>,
    pub n_excite: usize,
    pub n_control: usize,
    /// Scenario count of the verification commands.
    pub scenarios: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let plant = BenchmarkParams::default();
        Self {
            inertia: plant.inertia,
            disc_spring: plant.disc_spring,
            motor_spring: plant.motor_spring,
            damping: plant.damping,
            actuator_tau: plant.actuator_tau,
            dt: plant.dt,
            t: 150,
            t_values: vec![100, 150, 200],
            t_ini: 4,
            horizon: 40,
            q_scale: 1.0,
            r_scale: 0.1,
            sigma_w: 1e-2,
            lambda_g: 1.0,
            lambda_sigma: 1e4,
            u_bound: 0.7,
            seed: 0,
            seeds: (0..10).collect(),
            n_excite: 20,
            n_control: 60,
            scenarios: 25,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.t_ini == 0 || self.horizon == 0 {
            return bad("T_ini and N must be positive".into());
        }
        if self.t == 0 || self.t_values.contains(&0) {
            return bad("T values must be positive".into());
        }
        for (name, v) in [("Q_scale", self.q_scale), ("R_scale", self.r_scale), ("lambda_sigma", self.lambda_sigma), ("u_bound", self.u_bound)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("sigma_w", self.sigma_w), ("lambda_g", self.lambda_g)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if self.n_excite < self.t_ini {
            return bad(format!("n_excite = {} is shorter than T_ini = {}", self.n_excite, self.t_ini));
        }
        Ok(())
    }

    pub fn plant(&self) -> BenchmarkParams {
        BenchmarkParams {
            inertia: self.inertia,
            disc_spring: self.disc_spring,
            motor_spring: self.motor_spring,
            damping: self.damping,
            actuator_tau: self.actuator_tau,
            dt: self.dt,
        }
    }

    pub fn model(&self) -> Result<StateSpaceModel> {
        build_benchmark_model(&self.plant())
    }

    pub fn shape(&self, model: &StateSpaceModel, t: usize) -> Result<DataShape> {
        DataShape::for_model(model, t, self.t_ini, self.horizon)
    }

    pub fn objective(&self, model: &StateSpaceModel) -> Result<RegulationObjective> {
        RegulationObjective::scaled_identity(model.p(), model.m(), self.q_scale, self.r_scale)
    }

    pub fn weights(&self) -> Result<RegWeights> {
        RegWeights::new(self.lambda_g, self.lambda_sigma, self.lambda_sigma)
    }

    pub fn bounds(&self, model: &StateSpaceModel) -> BoxConstraints {
        BoxConstraints::input_box(model.m(), model.p(), self.u_bound)
    }
}

/// SHA-256 of the canonical JSON form of the configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Written next to every set of outputs.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
    pub version: &'static str,
}

impl Manifest {
    pub fn new(command: impl Into<String>, config: &RunConfig, seeds: Vec<u64>, outputs: Vec<String>) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            config_hash: config_hash(config),
            seeds,
            outputs,
            version: env!("CARGO_PKG_VERSION"),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
