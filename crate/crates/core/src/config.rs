//! Scenario configuration (JSON).
//!
//! Every field except the two vehicles has a default; see
//! `configs/ref_s_path.json` for a complete document.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{Gains, PathSpec};
use crate::sim::vehicle::{Pose, VehicleParams};
use crate::sim::{Environment, Obstacle};
use crate::transfer::{DEFAULT_PSI, DEFAULT_REGION_VERTICES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid config field `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of speed values over [0, 1].
    pub nv: usize,
    /// Number of steering values over [−1, 1].
    pub ngamma: usize,
    /// Seconds each command is held.
    #[serde(default = "default_duration")]
    pub duration: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathConfig {
    SPath {
        radius: f64,
        #[serde(default = "default_spacing")]
        spacing: f64,
    },
    Waypoints {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default = "default_path")]
    pub path: PathConfig,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    #[serde(default = "default_fov")]
    pub fov_radius: f64,
    /// Start pose; defaults to the path start, aligned with the path.
    #[serde(default)]
    pub start: Option<Pose>,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        EnvironmentConfig {
            path: default_path(),
            obstacles: Vec::new(),
            fov_radius: default_fov(),
            start: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub teacher: VehicleParams,
    pub learner: VehicleParams,
    #[serde(default = "default_calibration")]
    pub calibration: GridSpec,
    #[serde(default = "default_primitives")]
    pub primitives: GridSpec,
    #[serde(default)]
    pub gains: Gains,
    #[serde(default = "default_psi")]
    pub psi: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_region_vertices")]
    pub region_vertices: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    /// Weight of each new position reading in the position filter; 1 uses
    /// raw readings.
    #[serde(default = "default_estimator_gain")]
    pub estimator_gain: f64,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
}

fn default_duration() -> f64 {
    1.0
}
fn default_spacing() -> f64 {
    0.05
}
fn default_path() -> PathConfig {
    PathConfig::SPath {
        radius: 4.0,
        spacing: default_spacing(),
    }
}
fn default_fov() -> f64 {
    3.0
}
fn default_calibration() -> GridSpec {
    GridSpec {
        nv: 5,
        ngamma: 5,
        duration: 1.0,
    }
}
fn default_primitives() -> GridSpec {
    GridSpec {
        nv: 11,
        ngamma: 11,
        duration: 1.0,
    }
}
fn default_psi() -> f64 {
    DEFAULT_PSI
}
fn default_eta() -> f64 {
    0.5
}
fn default_horizon() -> usize {
    2
}
fn default_region_vertices() -> usize {
    DEFAULT_REGION_VERTICES
}
fn default_dt() -> f64 {
    0.05
}
fn default_sigma() -> f64 {
    0.1
}
fn default_estimator_gain() -> f64 {
    0.1
}
fn default_goal_tolerance() -> f64 {
    0.2
}
fn default_max_steps() -> usize {
    10_000
}
fn default_output_dir() -> String {
    "out".to_string()
}

impl ScenarioConfig {
    /// The simulated degradation: teacher 3 m/s and π/3 rad/s, learner
    /// 1 m/s and π/8 rad/s, everything else at its default.
    pub fn degraded_reference() -> Self {
        parse_config(&format!(
            r#"{{"teacher": {{"v_max": 3.0, "gamma_max": {}}}, "learner": {{"v_max": 1.0, "gamma_max": {}}}}}"#,
            PI / 3.0,
            PI / 8.0
        ))
        .expect("built-in config is valid")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn path(&self) -> PathSpec {
        match &self.environment.path {
            PathConfig::SPath { radius, spacing } => PathSpec::s_path(*radius, *spacing),
            PathConfig::Waypoints { points } => {
                PathSpec::from_waypoints(points.clone()).expect("validated waypoints")
            }
        }
    }

    pub fn environment(&self) -> Environment {
        Environment {
            obstacles: self.environment.obstacles.clone(),
            fov_radius: self.environment.fov_radius,
            path: self.path(),
        }
    }

    pub fn start_pose(&self) -> Pose {
        self.environment.start.unwrap_or_else(|| {
            let path = self.path();
            let p = path.waypoints[0];
            Pose::new(p[0], p[1], path.headings[0])
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(field, format!("must be non-negative, got {v}")))
            }
        };
        positive("teacher.v_max", self.teacher.v_max)?;
        positive("teacher.gamma_max", self.teacher.gamma_max)?;
        positive("learner.v_max", self.learner.v_max)?;
        positive("learner.gamma_max", self.learner.gamma_max)?;
        for (name, g) in [("calibration", &self.calibration), ("primitives", &self.primitives)] {
            if g.nv == 0 {
                return Err(ConfigError::invalid(&format!("{name}.nv"), "grid must be non-empty"));
            }
            if g.ngamma == 0 {
                return Err(ConfigError::invalid(&format!("{name}.ngamma"), "grid must be non-empty"));
            }
            positive(&format!("{name}.duration"), g.duration)?;
        }
        non_negative("gains.k_d", self.gains.k_d)?;
        non_negative("gains.k_theta", self.gains.k_theta)?;
        non_negative("psi", self.psi)?;
        positive("eta", self.eta)?;
        if self.horizon == 0 {
            return Err(ConfigError::invalid("horizon", "must be at least 1"));
        }
        if !(4..=12).contains(&self.region_vertices) {
            return Err(ConfigError::invalid("region_vertices", "must be in 4..=12"));
        }
        positive("dt", self.dt)?;
        for (name, g) in [("calibration", &self.calibration), ("primitives", &self.primitives)] {
            if g.duration < self.dt {
                return Err(ConfigError::invalid(&format!("{name}.duration"), "shorter than dt"));
            }
        }
        non_negative("noise_sigma", self.noise_sigma)?;
        if !(self.estimator_gain > 0.0 && self.estimator_gain <= 1.0) {
            return Err(ConfigError::invalid("estimator_gain", "must be in (0, 1]"));
        }
        positive("goal_tolerance", self.goal_tolerance)?;
        if self.max_steps == 0 {
            return Err(ConfigError::invalid("max_steps", "must be at least 1"));
        }
        let env = &self.environment;
        positive("environment.fov_radius", env.fov_radius)?;
        match &env.path {
            PathConfig::SPath { radius, spacing } => {
                positive("environment.path.radius", *radius)?;
                positive("environment.path.spacing", *spacing)?;
            }
            PathConfig::Waypoints { points } => {
                PathSpec::from_waypoints(points.clone())
                    .map_err(|e| ConfigError::invalid("environment.path.points", e.to_string()))?;
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(ConfigError::invalid("environment.path.points", "non-finite coordinate"));
                }
            }
        }
        for (i, o) in env.obstacles.iter().enumerate() {
            positive(&format!("environment.obstacles[{i}].radius"), o.radius)?;
            if !(o.x.is_finite() && o.y.is_finite()) {
                return Err(ConfigError::invalid(&format!("environment.obstacles[{i}]"), "non-finite centre"));
            }
        }
        if self.output_dir.is_empty() {
            return Err(ConfigError::invalid("output_dir", "must not be empty"));
        }
        Ok(())
    }
}

/// Parses and validates a JSON scenario config.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}
