//! Driving-style-aware lane-change decisions and trajectory planning.
//!
//! The decision layer solves a Nash or Stackelberg game between the ego car and its
//! adjacent cars over a discretized action grid; the planning layer tracks the chosen
//! lane with a receding-horizon controller acting on a preview-point driver model, and
//! avoids other vehicles through a collision-risk potential field.

pub mod costs;
pub mod error;
pub mod field;
pub mod game;
pub mod metrics;
pub mod model;
pub mod mpc;
pub mod road;
pub mod scenario;
pub mod sim;
pub mod style;
pub mod trace;

pub use costs::{CostBreakdown, CostGains, DecisionAction, DecisionConfig, Sigma};
pub use error::{FieldError, GameError, ModelError, PlanError, ScenarioError, SimError, StyleError};
pub use field::{FieldParams, Obstacle};
pub use game::{ActionGrid, EquilibriumKind, GameSolution};
pub use metrics::{summarize, RunMetrics};
pub use model::{ControlInput, DriverParams, VehicleParams, VehicleState};
pub use mpc::{MpcConfig, PlanResult};
pub use road::RoadGeometry;
pub use scenario::{load_scenario, resolve_scenario, Role, ScenarioConfig};
pub use sim::{run_simulation, TraceLog};
pub use style::{style_profile, CostWeights, DrivingStyle, StyleProfile};
