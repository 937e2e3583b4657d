//! Receding-horizon planning of the driver's preview point.
//!
//! The integrated model is linearized once per planning call at the current state and
//! discretized with a zero-order hold. The increments of the preview coordinate over
//! the control horizon are optimized by projected gradient descent on a cost that
//! penalizes the potential field, the lateral error to the target lane, the heading
//! error and the increments themselves.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, ModelError, PlanError};
use crate::field::{oriented_field, road_field_at, FieldParams, Obstacle, OrientedObstacle};
use crate::model::{
    derivatives, discretize, linearize, ControlInput, DriverParams, StateMatrix, StateVector, VehicleParams,
    VehicleState,
};
use crate::road::{wrap_angle, RoadGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Prediction horizon N_p (steps).
    pub prediction_horizon: usize,
    /// Control horizon N_c (steps).
    pub control_horizon: usize,
    /// Sample time (s).
    pub dt: f64,
    /// Output weights, row-major.
    pub q: [[f64; 3]; 3],
    /// Weight of squared increments.
    pub r: f64,
    /// Preview-point bounds (m). `None` means the lateral extent of the road.
    pub u_bounds: Option<[f64; 2]>,
    /// Per-step increment bounds (m).
    pub du_bounds: [f64; 2],
    pub max_iterations: usize,
    /// Relative cost change at which the optimizer stops.
    pub tolerance: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            prediction_horizon: 40,
            control_horizon: 5,
            dt: 0.05,
            q: [[1.0, 0.0, 0.0], [0.0, 10.0, 0.0], [0.0, 0.0, 50.0]],
            r: 1.0,
            u_bounds: None,
            du_bounds: [-0.3, 0.3],
            max_iterations: 100,
            tolerance: 1e-6,
        }
    }
}

impl MpcConfig {
    pub fn q_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.q[i][j])
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.control_horizon < 1 || self.prediction_horizon < self.control_horizon {
            return Err(format!(
                "need prediction_horizon >= control_horizon >= 1, got {} and {}",
                self.prediction_horizon, self.control_horizon
            ));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        let q = self.q_matrix();
        if (q - q.transpose()).abs().max() > 1e-12 {
            return Err("q must be symmetric".into());
        }
        if q.symmetric_eigenvalues().min() < -1e-12 {
            return Err("q must be positive semidefinite".into());
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(format!("r must be positive, got {}", self.r));
        }
        if !(self.du_bounds[0] <= 0.0 && 0.0 <= self.du_bounds[1]) {
            return Err(format!("du_bounds {:?} must bracket zero", self.du_bounds));
        }
        if let Some([lo, hi]) = self.u_bounds {
            if !(lo < hi) {
                return Err(format!("u_bounds [{lo}, {hi}] are not ordered"));
            }
        }
        if self.max_iterations == 0 || !(self.tolerance >= 0.0) {
            return Err("max_iterations must be positive and tolerance nonnegative".into());
        }
        Ok(())
    }
}

/// Field value, lateral error to the target lane and heading error at one predicted step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputVector {
    pub field: f64,
    pub lateral_error: f64,
    pub yaw_error: f64,
}

impl OutputVector {
    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.field, self.lateral_error, self.yaw_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub du_sequence: Vec<f64>,
    pub u_applied: f64,
    pub predicted_states: Vec<VehicleState>,
    pub predicted_outputs: Vec<OutputVector>,
    pub cost: f64,
    /// Cost of the all-zero increment sequence.
    pub zero_cost: f64,
    pub iterations: usize,
    /// Cost of every accepted iterate, starting with the zero sequence.
    pub cost_history: Vec<f64>,
    /// The preview bounds used for this call.
    pub u_bounds: [f64; 2],
    /// Set when optimization was abandoned and the zero sequence returned.
    pub degraded: bool,
}

/// Everything the planner needs besides the decision variables.
#[derive(Debug, Clone)]
pub struct PlanningProblem<'a> {
    pub state: VehicleState,
    /// Preview command applied at the previous step.
    pub u_prev: f64,
    /// Longitudinal acceleration held over the horizon.
    pub accel: f64,
    pub target_lane: u8,
    pub road: &'a RoadGeometry,
    pub obstacles: &'a [Obstacle],
    pub field: &'a FieldParams,
    pub vehicle: &'a VehicleParams,
    pub driver: &'a DriverParams,
    pub config: &'a MpcConfig,
}

/// Affine prediction model `x⁺ = A x + B u + d`, frozen over the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionModel {
    pub a: StateMatrix,
    pub b: SMatrix<f64, 8, 1>,
    pub d: StateVector,
}

impl PredictionModel {
    /// Linearizes at `(state, u0)` and discretizes with sample time `dt`. The affine term
    /// carries the part of the nonlinear dynamics that the Jacobians leave out at the
    /// operating point, such as the held acceleration.
    pub fn at(
        state: &VehicleState,
        u0: f64,
        accel: f64,
        vehicle: &VehicleParams,
        driver: &DriverParams,
        dt: f64,
    ) -> Result<Self, ModelError> {
        let input = ControlInput { preview_y: u0, accel };
        let (a, b) = linearize(state, &input, vehicle, driver)?;
        let x0 = state.to_vector();
        let f0 = derivatives(state, &input, vehicle, driver)?;
        let c = f0 - a * x0 - b * u0;
        let bc = SMatrix::<f64, 8, 2>::from_columns(&[b.column(0).into_owned(), c]);
        let (ak, bck) = discretize(&a, &bc, dt)?;
        Ok(Self {
            a: ak,
            b: bck.column(0).into_owned(),
            d: bck.column(1).into_owned(),
        })
    }

    pub fn step(&self, x: &StateVector, u: f64) -> StateVector {
        self.a * x + self.b * u + self.d
    }
}

impl<'a> PlanningProblem<'a> {
    pub fn model(&self) -> Result<PredictionModel, ModelError> {
        PredictionModel::at(&self.state, self.u_prev, self.accel, self.vehicle, self.driver, self.config.dt)
    }

    /// Preview-point bounds: configured, or the road's lateral extent around the ego.
    pub fn u_bounds(&self) -> [f64; 2] {
        if let Some(b) = self.config.u_bounds {
            return b;
        }
        let station = self.road.to_frenet(self.state.x, self.state.y).station;
        let (right, left) = self.road.lateral_extent(station.clamp(0.0, self.road.length));
        let preview = (station + self.driver.preview * self.state.vx).clamp(0.0, self.road.length);
        let (_, y_right) = self.road.to_global(preview, right);
        let (_, y_left) = self.road.to_global(preview, left);
        [y_right.min(y_left), y_right.max(y_left)]
    }

    /// Obstacle poses at prediction steps `1..=N_p`; they do not depend on the plan.
    fn obstacle_track(&self) -> Vec<Vec<OrientedObstacle>> {
        let cfg = self.config;
        (1..=cfg.prediction_horizon)
            .map(|i| {
                let t = i as f64 * cfg.dt;
                self.obstacles.iter().map(|o| OrientedObstacle::from(&o.advanced(t))).collect()
            })
            .collect()
    }

    fn outputs_with(&self, s: &VehicleState, obstacles: &[OrientedObstacle]) -> Result<OutputVector, FieldError> {
        let f = self.road.to_frenet(s.x, s.y);
        let oc: f64 = obstacles.iter().map(|o| oriented_field(s.x, s.y, o, &self.field.obstacle)).sum();
        let field = oc + road_field_at(f, self.road, &self.field.road)?;
        Ok(OutputVector {
            field,
            lateral_error: f.offset - self.road.lane_center(self.target_lane),
            yaw_error: wrap_angle(s.yaw - self.road.heading_at(f.station)),
        })
    }
}

/// Preview commands over the prediction horizon: increments accumulate over the control
/// horizon and the command is held afterwards.
pub fn preview_commands(u_prev: f64, du_seq: &[f64], horizon: usize) -> Vec<f64> {
    let mut u = u_prev;
    (0..horizon)
        .map(|i| {
            if let Some(du) = du_seq.get(i) {
                u += du;
            }
            u
        })
        .collect()
}

/// Predicted states and outputs for steps `1..=N_p`.
pub fn predict_outputs(
    problem: &PlanningProblem,
    model: &PredictionModel,
    du_seq: &[f64],
) -> Result<(Vec<VehicleState>, Vec<OutputVector>), PlanError> {
    predict_along(problem, model, &problem.obstacle_track(), du_seq)
}

fn predict_along(
    problem: &PlanningProblem,
    model: &PredictionModel,
    track: &[Vec<OrientedObstacle>],
    du_seq: &[f64],
) -> Result<(Vec<VehicleState>, Vec<OutputVector>), PlanError> {
    let cfg = problem.config;
    if du_seq.len() > cfg.control_horizon {
        return Err(PlanError::Config(format!(
            "{} increments exceed the control horizon {}",
            du_seq.len(),
            cfg.control_horizon
        )));
    }
    let mut x = problem.state.to_vector();
    let mut states = Vec::with_capacity(cfg.prediction_horizon);
    let mut outputs = Vec::with_capacity(cfg.prediction_horizon);
    for (u, obstacles) in preview_commands(problem.u_prev, du_seq, cfg.prediction_horizon).into_iter().zip(track) {
        x = model.step(&x, u);
        let s = VehicleState::from_vector(&x);
        if !s.is_finite() {
            return Err(ModelError::NonFinite("predicted state").into());
        }
        outputs.push(problem.outputs_with(&s, obstacles)?);
        states.push(s);
    }
    Ok((states, outputs))
}

/// `Σ yᵀ Q y + Σ R Δu²`.
pub fn mpc_cost(outputs: &[OutputVector], du_seq: &[f64], q: &Matrix3<f64>, r: f64) -> f64 {
    let tracking: f64 = outputs
        .iter()
        .map(|o| {
            let y = o.as_vector();
            (y.transpose() * q * y)[0]
        })
        .sum();
    tracking + r * du_seq.iter().map(|d| d * d).sum::<f64>()
}

/// Maps a raw increment sequence onto the feasible set, step by step: each increment is
/// clipped to its own box and to what keeps the command inside the preview bounds. When
/// the command starts outside the bounds it moves toward them as fast as allowed.
pub fn project_increments(raw: &[f64], u_prev: f64, u_bounds: [f64; 2], du_bounds: [f64; 2]) -> Vec<f64> {
    let mut u = u_prev;
    raw.iter()
        .map(|&d| {
            let lo = (u_bounds[0] - u).max(du_bounds[0]);
            let hi = (u_bounds[1] - u).min(du_bounds[1]);
            let d = if lo <= hi {
                d.clamp(lo, hi)
            } else if u < u_bounds[0] {
                du_bounds[1]
            } else {
                du_bounds[0]
            };
            u += d;
            d
        })
        .collect()
}

/// Optimizes the increment sequence for one planning step.
pub fn solve_plan(problem: &PlanningProblem) -> Result<PlanResult, PlanError> {
    let cfg = problem.config;
    cfg.validate().map_err(PlanError::Config)?;
    let model = problem.model()?;
    let q = cfg.q_matrix();
    let n = cfg.control_horizon;
    let ub = problem.u_bounds();
    let track = problem.obstacle_track();
    let eval = |du: &[f64]| -> Result<f64, PlanError> {
        let (_, out) = predict_along(problem, &model, &track, du)?;
        Ok(mpc_cost(&out, du, &q, cfg.r))
    };

    let zero = vec![0.0; n];
    let zero_cost = eval(&zero)?;
    let start = project_increments(&zero, problem.u_prev, ub, cfg.du_bounds);
    let mut x = start;
    let mut fx = eval(&x)?;
    let forced = x.iter().any(|d| *d != 0.0);
    let mut history = vec![fx];
    let mut iterations = 0;
    let span = cfg.du_bounds[1] - cfg.du_bounds[0];

    while iterations < cfg.max_iterations && fx.is_finite() {
        iterations += 1;
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let h = 1e-6;
            let mut p = x.clone();
            let mut m = x.clone();
            p[i] += h;
            m[i] -= h;
            grad[i] = (eval(&p)? - eval(&m)?) / (2.0 * h);
        }
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax == 0.0 || !gmax.is_finite() {
            break;
        }
        let mut alpha = span / gmax;
        let mut accepted = None;
        for _ in 0..40 {
            let raw: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - alpha * gi).collect();
            let cand = project_increments(&raw, problem.u_prev, ub, cfg.du_bounds);
            let decrease: f64 = grad.iter().zip(cand.iter().zip(&x)).map(|(g, (c, xi))| g * (c - xi)).sum();
            if decrease < 0.0 {
                let fc = eval(&cand)?;
                if fc <= fx + 1e-4 * decrease {
                    accepted = Some((cand, fc));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((cand, fc)) = accepted else { break };
        let change = (fx - fc) / fx.abs().max(1e-12);
        x = cand;
        fx = fc;
        history.push(fx);
        if change < cfg.tolerance {
            break;
        }
    }

    let degraded = !fx.is_finite() || (fx > zero_cost && !forced);
    if degraded {
        x = zero;
        fx = zero_cost;
        history = vec![zero_cost];
    }
    let (states, outputs) = predict_along(problem, &model, &track, &x)?;
    Ok(PlanResult {
        u_applied: apply_receding(problem.u_prev, &x),
        du_sequence: x,
        predicted_states: states,
        predicted_outputs: outputs,
        cost: fx,
        zero_cost,
        iterations,
        cost_history: history,
        u_bounds: ub,
        degraded,
    })
}

/// First command of the plan: `u_prev + Δu₀`.
pub fn apply_receding(u_prev: f64, du_sequence: &[f64]) -> f64 {
    u_prev + du_sequence.first().copied().unwrap_or(0.0)
}
