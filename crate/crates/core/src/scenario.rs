//! Scenario configuration: road, vehicle roster, limits and parameter blocks.
//!
//! Configurations are JSON documents. Every parameter block is optional and falls
//! back to its default; the road and the roster are required.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costs::DecisionConfig;
use crate::error::ScenarioError;
use crate::field::FieldParams;
use crate::game::{ActionGrid, EquilibriumKind};
use crate::model::VehicleParams;
use crate::mpc::MpcConfig;
use crate::road::RoadGeometry;
use crate::style::DrivingStyle;

const SCENARIO_A: &str = include_str!("../scenarios/scenario_a.json");
const SCENARIO_B: &str = include_str!("../scenarios/scenario_b.json");

/// Names of the scenarios shipped with the library.
pub const BUNDLED: [&str; 2] = ["scenario_a", "scenario_b"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    EC,
    LC,
    AC1,
    AC2,
    LC2,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::EC => "EC",
            Role::LC => "LC",
            Role::AC1 => "AC1",
            Role::AC2 => "AC2",
            Role::LC2 => "LC2",
        }
    }

    pub fn is_adjacent(&self) -> bool {
        matches!(self, Role::AC1 | Role::AC2)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub role: Role,
    /// Initial global position (m).
    pub position: [f64; 2],
    /// Initial longitudinal speed (m/s).
    pub speed: f64,
    /// Driving style of a non-ego vehicle; the ego's style is chosen per run.
    #[serde(default)]
    pub style: Option<DrivingStyle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub v_min: f64,
    pub v_max: f64,
    /// Per-lane speed limits overriding `v_max`, lane 1 first.
    pub lane_v_max: Option<Vec<f64>>,
    pub a_min: f64,
    pub a_max: f64,
    /// Spacing of the acceleration grid (m/s²).
    pub a_step: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            v_min: 0.0,
            v_max: 25.0,
            lane_v_max: None,
            a_min: -4.0,
            a_max: 3.0,
            a_step: 0.5,
        }
    }
}

impl Limits {
    pub fn grid(&self) -> ActionGrid {
        ActionGrid::uniform(self.a_min, self.a_max, self.a_step, self.v_min, self.v_max)
    }

    pub fn lane_limits(&self, lane_count: u8) -> Vec<f64> {
        match &self.lane_v_max {
            Some(v) => v.clone(),
            None => vec![self.v_max; lane_count as usize],
        }
    }
}

/// When a committed lane change counts as completed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Completion {
    /// Lateral error to the target lane centre (m).
    pub lateral: f64,
    /// Heading error to the road tangent (rad).
    pub yaw: f64,
}

impl Default for Completion {
    fn default() -> Self {
        Self { lateral: 0.2, yaw: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub road: RoadGeometry,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "default_strategy")]
    pub strategy: EquilibriumKind,
    /// Simulated time (s).
    pub duration: f64,
    /// Simulation step, also the decision epoch (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub decision: DecisionConfig,
    #[serde(default)]
    pub field: FieldParams,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub completion: Completion,
}

fn default_strategy() -> EquilibriumKind {
    EquilibriumKind::Nash
}

fn default_dt() -> f64 {
    0.05
}

impl ScenarioConfig {
    pub fn ego(&self) -> &VehicleSpec {
        self.vehicles.iter().find(|v| v.role == Role::EC).expect("validated roster")
    }

    /// Non-ego vehicles in roster order.
    pub fn others(&self) -> impl Iterator<Item = &VehicleSpec> {
        self.vehicles.iter().filter(|v| v.role != Role::EC)
    }

    /// Checks every invariant and reports the first violation with its field path.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.road.validate().map_err(|e| ScenarioError::invalid("road", e.to_string()))?;

        let egos = self.vehicles.iter().filter(|v| v.role == Role::EC).count();
        if egos != 1 {
            return Err(ScenarioError::invalid("vehicles", format!("exactly one EC is required, found {egos}")));
        }
        for (i, v) in self.vehicles.iter().enumerate() {
            let path = |f: &str| format!("vehicles[{i}].{f}");
            if !(v.position.iter().all(|p| p.is_finite())) {
                return Err(ScenarioError::invalid(path("position"), "position must be finite"));
            }
            if !(v.speed.is_finite() && v.speed >= 0.0) {
                return Err(ScenarioError::invalid(path("speed"), format!("speed must be nonnegative, got {}", v.speed)));
            }
            if v.role == Role::EC && v.speed <= 0.0 {
                return Err(ScenarioError::invalid(path("speed"), "the EC needs a positive speed"));
            }
            let f = self.road.to_frenet(v.position[0], v.position[1]);
            if !self.road.contains_station(f.station) {
                return Err(ScenarioError::invalid(path("position"), format!("station {:.3} m is off the road", f.station)));
            }
            match self.road.lane_at_offset(f.offset) {
                Some(lane) if self.road.lane_exists(lane, f.station) => {}
                _ => return Err(ScenarioError::invalid(path("position"), format!("offset {:.3} m is not on a lane", f.offset))),
            }
        }
        for (i, a) in self.vehicles.iter().enumerate() {
            for b in &self.vehicles[..i] {
                if a.role == b.role && a.role != Role::LC && a.role != Role::LC2 {
                    return Err(ScenarioError::invalid(format!("vehicles[{i}].role"), format!("duplicate role {}", a.role)));
                }
            }
        }

        let l = &self.limits;
        if !(l.v_min >= 0.0 && l.v_min < l.v_max) {
            return Err(ScenarioError::invalid("limits", format!("need 0 <= v_min < v_max, got {} and {}", l.v_min, l.v_max)));
        }
        if !(l.a_min < 0.0 && l.a_max > 0.0 && l.a_step > 0.0) {
            return Err(ScenarioError::invalid("limits", "need a_min < 0 < a_max and a positive a_step"));
        }
        if let Some(lanes) = &l.lane_v_max {
            if lanes.len() != self.road.lane_count as usize || lanes.iter().any(|v| !(*v > l.v_min)) {
                return Err(ScenarioError::invalid("limits.lane_v_max", "one limit above v_min per lane is required"));
            }
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(ScenarioError::invalid("duration", format!("duration must be positive, got {}", self.duration)));
        }
        if !(self.dt > 0.0 && self.dt <= self.duration) {
            return Err(ScenarioError::invalid("dt", format!("dt must be in (0, duration], got {}", self.dt)));
        }
        self.decision.validate().map_err(|m| ScenarioError::invalid("decision", m))?;
        self.field.validate().map_err(|m| ScenarioError::invalid("field", m))?;
        self.mpc.validate().map_err(|m| ScenarioError::invalid("mpc", m))?;
        if (self.mpc.dt - self.dt).abs() > 1e-12 {
            return Err(ScenarioError::invalid("mpc.dt", format!("planner dt {} must equal the simulation dt {}", self.mpc.dt, self.dt)));
        }
        self.vehicle.validate().map_err(|e| ScenarioError::invalid("vehicle", e.to_string()))?;
        if !(self.completion.lateral > 0.0 && self.completion.yaw > 0.0) {
            return Err(ScenarioError::invalid("completion", "completion thresholds must be positive"));
        }
        Ok(())
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// Source text of a bundled scenario.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    match name {
        "scenario_a" => Some(SCENARIO_A),
        "scenario_b" => Some(SCENARIO_B),
        _ => None,
    }
}

/// A bundled scenario by name, or a scenario file by path.
pub fn resolve_scenario(name_or_path: &str) -> Result<ScenarioConfig, ScenarioError> {
    match bundled_source(name_or_path) {
        Some(text) => parse_scenario(text),
        None => load_scenario(name_or_path),
    }
}
