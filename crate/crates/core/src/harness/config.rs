use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::controller::{ControllerMode, OcpConfig, OcpProblem, SolverSettings};
use crate::dynamics::{EgoInput, InputBounds, StateBounds};
use crate::error::{Error, Result};
use crate::geometry::{ArcPath, CircleShape, Configuration};
use crate::prediction::UncertaintyGrowth;
use crate::risk::SeverityParams;

/// Preset growth rates of the object's prediction uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyLevel {
    /// No growth: the belief stays as measured over the whole horizon.
    None,
    Low,
    Medium,
    High,
}

impl UncertaintyLevel {
    pub const MATRIX: [UncertaintyLevel; 3] = [Self::Low, Self::Medium, Self::High];

    pub fn growth(&self) -> UncertaintyGrowth {
        let (q, d) = match self {
            UncertaintyLevel::None => (0.0, 0.0),
            UncertaintyLevel::Low => (0.1, 1.0),
            UncertaintyLevel::Medium => (0.8, 2.0),
            UncertaintyLevel::High => (1.5, 3.0),
        };
        UncertaintyGrowth {
            q_diag: [q; 3],
            dq: [d, d],
            dv: d,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UncertaintyLevel::None => "none",
            UncertaintyLevel::Low => "low",
            UncertaintyLevel::Medium => "medium",
            UncertaintyLevel::High => "high",
        }
    }
}

impl std::str::FromStr for UncertaintyLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Self::None),
            "low" => Ok(Self::Low),
            "medium" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            other => Err(Error::InvalidConfig(format!("unknown uncertainty level {other:?}"))),
        }
    }
}

/// Full description of one closed-loop run. Unset fields take the values of
/// the reference crossing scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub path_goal: [f64; 3],
    pub path_curvature: f64,
    pub path_lambda_0: f64,
    pub path_lambda_g: f64,

    pub ego_init: [f64; 3],
    pub ego_radius: f64,
    pub ego_mass: f64,
    pub v_ref: f64,

    pub object_init: [f64; 3],
    pub object_radius: f64,
    pub object_mass: f64,
    /// Constant `(v, ω)` of the object's prediction model.
    pub object_input: [f64; 2],
    /// Inputs driving the object's true motion; `None` uses `object_input`.
    pub object_truth_input: Option<[f64; 2]>,
    /// Speed truncation interval of a fresh measurement.
    pub object_v_bounds: [f64; 2],

    pub uncertainty: UncertaintyLevel,
    /// Overrides the preset growth of `uncertainty` when set.
    pub growth: Option<UncertaintyGrowth>,
    pub epsilon: f64,
    pub controller: ControllerMode,

    pub dt: f64,
    pub horizon: usize,
    pub mcs_samples: usize,
    pub grid_points: usize,
    pub weight: [[f64; 4]; 4],
    pub input_bounds: InputBounds,
    pub state_bounds: StateBounds,
    pub solver: SolverSettings,

    pub duration_steps: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let ocp = OcpConfig::default();
        Self {
            path_goal: [65.0, 5.0, 0.0],
            path_curvature: 0.003,
            path_lambda_0: -95.0,
            path_lambda_g: 0.0,
            ego_init: [-10.0, 10.0, 0.0],
            ego_radius: 1.5,
            ego_mass: 1000.0,
            v_ref: 4.0,
            object_init: [5.0, -5.0, FRAC_PI_2],
            object_radius: 1.5,
            object_mass: 1000.0,
            object_input: [3.0, 1e-4],
            object_truth_input: None,
            object_v_bounds: [-5.0, 5.0],
            uncertainty: UncertaintyLevel::Low,
            growth: None,
            epsilon: 0.0,
            controller: ControllerMode::Stochastic,
            dt: ocp.dt,
            horizon: ocp.horizon,
            mcs_samples: ocp.mcs_samples,
            grid_points: ocp.grid_points,
            weight: ocp.weight,
            input_bounds: ocp.bounds,
            state_bounds: ocp.state_bounds,
            solver: ocp.solver,
            duration_steps: 40,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn growth(&self) -> UncertaintyGrowth {
        self.growth.unwrap_or_else(|| self.uncertainty.growth())
    }

    pub fn path(&self) -> Result<ArcPath> {
        ArcPath::new(
            self.path_goal.into(),
            self.path_curvature,
            self.path_lambda_0,
            self.path_lambda_g,
        )
    }

    pub fn object_truth_input(&self) -> EgoInput {
        let [v, w] = self.object_truth_input.unwrap_or(self.object_input);
        EgoInput::new(v, w)
    }

    pub fn ego_start(&self) -> Configuration {
        self.ego_init.into()
    }

    pub fn object_start(&self) -> Configuration {
        self.object_init.into()
    }

    pub fn ocp_config(&self) -> OcpConfig {
        OcpConfig {
            horizon: self.horizon,
            dt: self.dt,
            weight: self.weight,
            epsilon: self.epsilon,
            mode: self.controller,
            bounds: self.input_bounds,
            state_bounds: self.state_bounds,
            mcs_samples: self.mcs_samples,
            grid_points: self.grid_points,
            solver: self.solver,
        }
    }

    pub fn problem(&self) -> Result<OcpProblem> {
        let cfg = self.ocp_config();
        cfg.validate()?;
        let growth = self.growth();
        growth.validate()?;
        if self.duration_steps == 0 {
            return Err(Error::InvalidConfig("duration_steps must be at least 1".into()));
        }
        if !(self.v_ref >= 0.0) {
            return Err(Error::InvalidConfig("v_ref must be >= 0".into()));
        }
        Ok(OcpProblem {
            cfg,
            path: self.path()?,
            v_ref: self.v_ref,
            ego_shape: CircleShape::new(self.ego_radius)?,
            object_shape: CircleShape::new(self.object_radius)?,
            severity: SeverityParams::new(self.ego_mass, self.object_mass)?,
            object_input: EgoInput::new(self.object_input[0], self.object_input[1]),
            growth,
        })
    }
}
