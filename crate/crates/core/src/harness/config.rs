//! Scenario configuration files.
//!
//! Structured text with sections `[model]`, `[observer]`, `[truth]`,
//! `[noise.trajectory]`, `[noise.observation]`, `[run]`; unknown keys are
//! rejected. `theta` is given in report order `(x0, y0, vx, vy)` in km and
//! km/s.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{build_observer_path, ObserverSpec, TrajectoryModel};
use crate::noise::{ObservationNoise, TrajectoryNoise};
use crate::sim::Scenario;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelSection,
    pub observer: ObserverSpec,
    pub truth: TruthSection,
    pub noise: NoiseSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// Only `uniform_linear` is built in; the library accepts custom bases.
    pub kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    /// Report order `(x0, y0, vx, vy)`: km, km, km/s, km/s.
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub trajectory: TrajectoryNoiseSection,
    pub observation: ObservationNoiseSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryNoiseSection {
    /// `none`, `isotropic`, `anisotropic`, or `ar1`.
    pub kind: String,
    /// km; isotropic marginal standard deviation per coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_km: Option<f64>,
    /// km^2; row-major 2x2 covariance for the anisotropic kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov_km2: Option<[[f64; 2]; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    /// km; AR(1) innovation standard deviation per coordinate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_eta_km: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationNoiseSection {
    /// rad.
    pub sigma_rad: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n: usize,
    /// km; validity floor for the target range.
    pub r_min_km: f64,
}

impl TrajectoryNoiseSection {
    pub fn to_noise(&self) -> Result<TrajectoryNoise> {
        let noise = match self.kind.as_str() {
            "none" => TrajectoryNoise::None,
            "isotropic" => TrajectoryNoise::Isotropic {
                sigma: self
                    .sigma_km
                    .ok_or_else(|| Error::Config("isotropic noise needs sigma_km".into()))?,
            },
            "anisotropic" => {
                let c = self
                    .cov_km2
                    .ok_or_else(|| Error::Config("anisotropic noise needs cov_km2".into()))?;
                TrajectoryNoise::Anisotropic {
                    cov: Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]),
                }
            }
            "ar1" => TrajectoryNoise::Ar1 {
                phi: self.phi.ok_or_else(|| Error::Config("ar1 noise needs phi".into()))?,
                sigma_eta: self
                    .sigma_eta_km
                    .ok_or_else(|| Error::Config("ar1 noise needs sigma_eta_km".into()))?,
            },
            other => {
                return Err(Error::Config(format!("unknown trajectory noise kind: {other}")))
            }
        };
        noise.validate()?;
        Ok(noise)
    }
}

impl ScenarioConfig {
    pub fn to_scenario(&self) -> Result<Scenario> {
        if self.model.kind != "uniform_linear" {
            return Err(Error::Config(format!(
                "unknown model kind: {} (only uniform_linear is built in)",
                self.model.kind
            )));
        }
        let model = TrajectoryModel::uniform_linear(self.observer.duration_s);
        if self.truth.theta.len() != model.dim() {
            return Err(Error::Config(format!(
                "theta has {} entries, model needs {}",
                self.truth.theta.len(),
                model.dim()
            )));
        }
        let theta_star =
            model.from_report_order(&nalgebra::DVector::from_vec(self.truth.theta.clone()));
        let path = build_observer_path(self.observer.clone())?;
        if self.run.r_min_km <= 0.0 {
            return Err(Error::Config("r_min_km must be positive".into()));
        }
        Ok(Scenario {
            model,
            theta_star,
            path,
            traj_noise: self.noise.trajectory.to_noise()?,
            obs_noise: ObservationNoise::new(self.noise.observation.sigma_rad)?,
            n: self.run.n,
            r_min: self.run.r_min_km,
        })
    }
}

/// Parses a config file, rejecting unknown keys.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
}

/// The built-in maneuvering scenario with isotropic 10 m trajectory noise.
pub fn default_config() -> ScenarioConfig {
    ScenarioConfig {
        model: ModelSection { kind: "uniform_linear".into() },
        observer: crate::geometry::default_maneuvering_spec(),
        truth: TruthSection { theta: vec![2.8, 3.8, 0.225, -0.15] },
        noise: NoiseSection {
            trajectory: TrajectoryNoiseSection {
                kind: "isotropic".into(),
                sigma_km: Some(0.01),
                cov_km2: None,
                phi: None,
                sigma_eta_km: None,
            },
            observation: ObservationNoiseSection { sigma_rad: 1e-3 },
        },
        run: RunSection { n: 2000, r_min_km: 6.0 },
    }
}

/// The built-in scenario as a `Scenario`.
pub fn default_scenario() -> Scenario {
    default_config().to_scenario().expect("built-in scenario is valid")
}
