//! Run-configuration schema and its translation into library types.
//!
//! The initial set in a config is a Cartesian product of a bi-invariant
//! rotation ball (radius r_rot) and a Euclidean velocity ball (radius
//! r_omega). The pipeline consumes a single product-metric ball, so the
//! translation builds the tightest enclosing one with an identity rotation
//! metric: P = (r_rot/r_omega)^2 I and radius r_rot sqrt(2). The enclosure
//! direction keeps the over-approximation sound.

use attreach::dynamics::{AttitudeSystem, ControlLaw, DEFAULT_H_MAX, MAX_STEP};
use attreach::metrics::{MetricBall, MetricPair, SpdMatrix, State};
use attreach::reach::{ReachConfig, MAX_TUBE_SPAN};
use attreach::so3::{exp_so3, reorthonormalize, Mat3, Rotation, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{0}")]
    Invalid(String),
}

/// On-disk run configuration. Every numeric field must be finite.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Inertia matrix, 9 reals row-major. Invertibility is the only
    /// structural requirement.
    pub inertia: [f64; 9],
    /// "zero" or "paper_sec6" (the built-in velocity-stabilizing feedback
    /// tau = J^2 omega + hat(omega) J omega).
    pub control_law: String,
    pub initial: InitialSet,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default)]
    pub line_search: LineSearch,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub montecarlo: MonteCarlo,
    #[serde(default)]
    pub ball_export: BallExport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSet {
    /// 3 reals (axis-angle) or 9 reals (row-major matrix, repaired onto
    /// the group if slightly off).
    #[serde(rename = "R0")]
    pub r0: Vec<f64>,
    pub omega0: [f64; 3],
    pub r_rot: f64,
    pub r_omega: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSearch {
    pub c_min: f64,
    pub c_max: f64,
    pub n_steps: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            c_min: 0.0,
            c_max: 1.0,
            n_steps: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integrator {
    pub h_max: f64,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator { h_max: DEFAULT_H_MAX }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    pub n: usize,
}

impl Default for MonteCarlo {
    fn default() -> Self {
        MonteCarlo { n: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallExport {
    pub n_samples: usize,
}

impl Default for BallExport {
    fn default() -> Self {
        BallExport { n_samples: 100 }
    }
}

impl RunConfig {
    /// Parses and validates a config file, returning the raw bytes
    /// alongside (they are hashed into result metadata and copied next to
    /// the results for later verification).
    pub fn load(path: &Path) -> Result<(RunConfig, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig = serde_json::from_slice(&bytes)?;
        cfg.validate()?;
        Ok((cfg, bytes))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        let all_finite = |name: &str, vals: &[f64]| {
            if vals.iter().all(|v| v.is_finite()) {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("{name} must be finite")))
            }
        };
        all_finite("inertia", &self.inertia)?;
        all_finite("initial.R0", &self.initial.r0)?;
        all_finite("initial.omega0", &self.initial.omega0)?;
        all_finite(
            "initial radii",
            &[self.initial.r_rot, self.initial.r_omega],
        )?;
        all_finite(
            "line_search bounds",
            &[self.line_search.c_min, self.line_search.c_max],
        )?;
        all_finite("horizon", &[self.horizon])?;
        all_finite("integrator.h_max", &[self.integrator.h_max])?;

        if !matches!(self.initial.r0.len(), 3 | 9) {
            return invalid(format!(
                "initial.R0 must hold 3 reals (axis-angle) or 9 (matrix), got {}",
                self.initial.r0.len()
            ));
        }
        if self.control_law != "zero" && self.control_law != "paper_sec6" {
            return invalid(format!(
                "unknown control_law {:?}; known laws: \"zero\", \"paper_sec6\"",
                self.control_law
            ));
        }
        if self.horizon <= 0.0 {
            return invalid("horizon must be positive".into());
        }
        if self.steps == 0 {
            return invalid("steps must be at least 1".into());
        }
        if self.horizon / self.steps as f64 > MAX_TUBE_SPAN {
            return invalid(format!(
                "grid step horizon/steps = {} exceeds the tube-enclosure span \
                 limit {MAX_TUBE_SPAN}; use more steps",
                self.horizon / self.steps as f64
            ));
        }
        if self.initial.r_rot <= 0.0 || self.initial.r_omega <= 0.0 {
            return invalid("initial radii must be positive".into());
        }
        if self.initial.r_rot * 2f64.sqrt() >= FRAC_PI_2 {
            return invalid(format!(
                "initial rotation radius {} is too large for metric-ball propagation \
                 (enclosing product radius must stay below pi/2)",
                self.initial.r_rot
            ));
        }
        if self.line_search.c_min > self.line_search.c_max {
            return invalid("line_search.c_min exceeds c_max".into());
        }
        if self.line_search.n_steps == 0 {
            return invalid("line_search.n_steps must be at least 1".into());
        }
        if self.integrator.h_max <= 0.0 || self.integrator.h_max > MAX_STEP {
            return invalid(format!(
                "integrator.h_max must lie in (0, {MAX_STEP}]"
            ));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<AttitudeSystem, ConfigError> {
        let law = match self.control_law.as_str() {
            "zero" => ControlLaw::Zero,
            "paper_sec6" => ControlLaw::JSquaredFeedback,
            other => unreachable!("validate admits no law named {other:?}"),
        };
        AttitudeSystem::new(mat3_row_major(&self.inertia), law)
            .map_err(|e| ConfigError::Invalid(format!("inertia rejected: {e}")))
    }

    /// The full pipeline configuration this file describes.
    pub fn reach_config(&self) -> Result<ReachConfig, ConfigError> {
        self.validate()?;
        let system = self.system()?;
        let r0 = rotation_from_reals(&self.initial.r0)
            .map_err(|msg| ConfigError::Invalid(format!("initial.R0 {msg}")))?;
        let omega0 = Vec3::from_column_slice(&self.initial.omega0);
        let scale = self.initial.r_rot / self.initial.r_omega;
        let p = SpdMatrix::new(Mat3::identity() * (scale * scale))
            .expect("scaled identity is SPD for positive radii");
        let ball = MetricBall::new(
            State::new(r0, omega0),
            self.initial.r_rot * 2f64.sqrt(),
            MetricPair::new(SpdMatrix::identity(), p),
        );
        let mut cfg = ReachConfig::new(system, ball, self.horizon, self.steps);
        cfg.c_min = self.line_search.c_min;
        cfg.c_max = self.line_search.c_max;
        cfg.line_search_steps = self.line_search.n_steps;
        cfg.h_max = self.integrator.h_max;
        Ok(cfg)
    }
}

/// 3 reals: axis-angle through the exponential. 9 reals: row-major matrix,
/// projected back onto the group when within repair range.
pub fn rotation_from_reals(vals: &[f64]) -> Result<Rotation, String> {
    if vals.iter().any(|v| !v.is_finite()) {
        return Err("entries must be finite".into());
    }
    match vals.len() {
        3 => Ok(exp_so3(&Vec3::new(vals[0], vals[1], vals[2]))),
        9 => {
            let m: [f64; 9] = vals.try_into().expect("length checked");
            reorthonormalize(&mat3_row_major(&m))
                .map_err(|e| format!("is not close to a rotation: {e}"))
        }
        n => Err(format!("must hold 3 or 9 reals, got {n}")),
    }
}

pub fn mat3_row_major(vals: &[f64; 9]) -> Mat3 {
    Mat3::from_row_slice(vals)
}
