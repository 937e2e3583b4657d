//! Closed-loop simulation: decision game every step, preview-point planning, the
//! integrated model for the ego and point masses for everyone else.

use serde::{Deserialize, Serialize};

use crate::costs::{Agent, CostBreakdown, DecisionScene, Sigma};
use crate::error::{ScenarioError, SimError};
use crate::field::{total_field, Obstacle};
use crate::game::{solve_2p, solve_two_ac, ActionGrid, EquilibriumKind, GameInputs, GameSolution, Side};
use crate::model::{step, ControlInput, VehicleState};
use crate::mpc::{solve_plan, PlanResult, PlanningProblem};
use crate::road::wrap_angle;
use crate::scenario::{Role, ScenarioConfig};
use crate::style::{CostWeights, DrivingStyle};

/// A non-ego vehicle moving along the centre of its lane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub lane: u8,
    pub station: f64,
    pub offset: f64,
    pub speed: f64,
    /// Acceleration applied over the step that starts at this sample (m/s²).
    pub accel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OtherSample {
    pub station: f64,
    pub offset: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub accel: f64,
}

/// Planner diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub cost: f64,
    pub zero_cost: f64,
    pub iterations: usize,
    pub du0: f64,
    pub degraded: bool,
    /// Accepted iterates never increased the cost.
    pub monotone: bool,
    /// All increments and commands respected their boxes.
    pub in_bounds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub time: f64,
    pub ego: VehicleState,
    pub ego_station: f64,
    pub ego_offset: f64,
    /// Lane the ego is considered to be in.
    pub lane: u8,
    /// Lane tracked by the planner.
    pub target_lane: u8,
    /// σ* of this epoch.
    pub sigma: Sigma,
    /// a_x* of this epoch (m/s²).
    pub accel: f64,
    /// A lane change is committed and in progress.
    pub committed: bool,
    pub multiplicity: usize,
    pub fallback: bool,
    pub side: Option<Side>,
    pub costs: CostBreakdown,
    /// Preview command applied over the step (m).
    pub u: f64,
    pub plan: PlanDiagnostics,
    /// Total field at the ego position.
    pub field: f64,
    /// Smallest Euclidean distance between any two vehicles (m).
    pub min_distance: f64,
    pub others: Vec<OtherSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub scenario: String,
    pub style: DrivingStyle,
    pub strategy: EquilibriumKind,
    pub dt: f64,
    /// Roles of the non-ego vehicles, in the column order of `TraceRow::others`.
    pub roles: Vec<Role>,
    pub rows: Vec<TraceRow>,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    style: DrivingStyle,
    strategy: EquilibriumKind,
    grid: ActionGrid,
    limits: Vec<f64>,
    ego_weights: CostWeights,
    ac_weights: Vec<CostWeights>,
    ac_headways: Vec<f64>,
    roles: Vec<Role>,
    ego: VehicleState,
    lane: u8,
    u: f64,
    committed: Option<(Sigma, u8)>,
    others: Vec<PointMass>,
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a ScenarioConfig, style: DrivingStyle, strategy: EquilibriumKind) -> Result<Self, SimError> {
        cfg.validate()?;
        let road = &cfg.road;
        let spec = cfg.ego();
        let f = road.to_frenet(spec.position[0], spec.position[1]);
        let lane = road
            .lane_at_offset(f.offset)
            .ok_or_else(|| ScenarioError::invalid("vehicles", "EC is not on a lane"))?;
        let ego = VehicleState {
            yaw: road.heading_at(f.station),
            ..VehicleState::straight(spec.speed, spec.position[0], spec.position[1])
        };
        let mut roles = Vec::new();
        let mut others = Vec::new();
        let mut ac_weights = Vec::new();
        let mut ac_headways = Vec::new();
        for v in cfg.others() {
            let f = road.to_frenet(v.position[0], v.position[1]);
            let lane = road
                .lane_at_offset(f.offset)
                .ok_or_else(|| ScenarioError::invalid("vehicles", format!("{} is not on a lane", v.role)))?;
            roles.push(v.role);
            let profile = v.style.unwrap_or(DrivingStyle::Normal).profile();
            ac_weights.push(profile.weights);
            ac_headways.push(profile.time_headway);
            others.push(PointMass {
                lane,
                station: f.station,
                offset: road.lane_center(lane),
                speed: v.speed,
                accel: 0.0,
            });
        }
        Ok(Self {
            cfg,
            style,
            strategy,
            grid: cfg.limits.grid(),
            limits: cfg.limits.lane_limits(road.lane_count),
            ego_weights: style.profile().weights,
            ac_weights,
            ac_headways,
            roles,
            u: ego.y,
            ego,
            lane,
            committed: None,
            others,
        })
    }

    fn obstacles(&self) -> Vec<Obstacle> {
        self.others
            .iter()
            .map(|o| {
                let (x, y) = self.cfg.road.to_global(o.station, o.offset);
                Obstacle { x, y, heading: self.cfg.road.heading_at(o.station), speed: o.speed }
            })
            .collect()
    }

    fn decide(&self, station: f64, offset: f64) -> Result<GameSolution, SimError> {
        let road = &self.cfg.road;
        let scene = DecisionScene {
            road,
            config: &self.cfg.decision,
            ego: Agent { lane: self.lane, station, offset, speed: self.ego.vx, headway: self.style.profile().time_headway },
            others: self
                .others
                .iter()
                .zip(&self.ac_headways)
                .map(|(o, &headway)| Agent { lane: o.lane, station: o.station, offset: o.offset, speed: o.speed, headway })
                .collect(),
            default_accels: vec![0.0; self.others.len()],
            speed_limits: self.limits.clone(),
        };
        let mut grid = self.grid.clone();
        if let Some((sigma, target)) = self.committed {
            grid.sigmas = vec![sigma];
            let inputs = GameInputs { grid: &grid, ego_weights: &self.ego_weights, ac_weights: &self.ac_weights };
            return Ok(solve_2p(self.strategy, &scene, scene.adjacent_of(target), &inputs)?);
        }
        let inputs = GameInputs { grid: &grid, ego_weights: &self.ego_weights, ac_weights: &self.ac_weights };
        let side_lane = |sigma: Sigma| {
            sigma
                .target_lane(self.lane, road.lane_count)
                .filter(|&l| road.lane_exists(l, station))
        };
        match (side_lane(Sigma::Left), side_lane(Sigma::Right)) {
            (Some(l), Some(r)) => Ok(solve_two_ac(self.strategy, &scene, scene.adjacent_of(l), scene.adjacent_of(r), &inputs)?),
            (Some(l), None) => Ok(solve_2p(self.strategy, &scene, scene.adjacent_of(l), &inputs)?),
            (None, Some(r)) => Ok(solve_2p(self.strategy, &scene, scene.adjacent_of(r), &inputs)?),
            (None, None) => Ok(solve_2p(self.strategy, &scene, None, &inputs)?),
        }
    }

    fn min_distance(&self) -> f64 {
        let road = &self.cfg.road;
        let mut pts: Vec<(f64, f64)> = vec![(self.ego.x, self.ego.y)];
        pts.extend(self.others.iter().map(|o| road.to_global(o.station, o.offset)));
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in 0..i {
                best = best.min((pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1));
            }
        }
        best
    }

    fn plan(&self, target_lane: u8, accel: f64, obstacles: &[Obstacle]) -> Result<PlanResult, SimError> {
        let driver = self.style.profile().driver;
        let problem = PlanningProblem {
            state: self.ego,
            u_prev: self.u,
            accel,
            target_lane,
            road: &self.cfg.road,
            obstacles,
            field: &self.cfg.field,
            vehicle: &self.cfg.vehicle,
            driver: &driver,
            config: &self.cfg.mpc,
        };
        Ok(solve_plan(&problem)?)
    }

    fn diagnostics(&self, plan: &PlanResult) -> PlanDiagnostics {
        let [lo, hi] = plan.u_bounds;
        let [dlo, dhi] = self.cfg.mpc.du_bounds;
        let mut u = self.u;
        let started_inside = lo <= u && u <= hi;
        let mut in_bounds = true;
        for d in &plan.du_sequence {
            u += d;
            in_bounds &= *d >= dlo - 1e-12 && *d <= dhi + 1e-12;
            if started_inside {
                in_bounds &= u >= lo - 1e-9 && u <= hi + 1e-9;
            }
        }
        PlanDiagnostics {
            cost: plan.cost,
            zero_cost: plan.zero_cost,
            iterations: plan.iterations,
            du0: plan.du_sequence[0],
            degraded: plan.degraded,
            monotone: plan.cost_history.windows(2).all(|w| w[1] <= w[0]),
            in_bounds,
        }
    }

    fn advance_others(&mut self) {
        let dt = self.cfg.dt;
        let (v_min, v_max) = (self.cfg.limits.v_min, self.cfg.limits.v_max);
        for o in &mut self.others {
            let v = (o.speed + o.accel * dt).clamp(v_min.min(o.speed), v_max.max(o.speed));
            o.accel = (v - o.speed) / dt;
            o.station += 0.5 * (o.speed + v) * dt;
            o.speed = v;
        }
    }

    fn row(&self, step: usize, station: f64, offset: f64) -> TraceRow {
        let road = &self.cfg.road;
        TraceRow {
            step,
            time: step as f64 * self.cfg.dt,
            ego: self.ego,
            ego_station: station,
            ego_offset: offset,
            lane: self.lane,
            target_lane: self.committed.map(|(_, t)| t).unwrap_or(self.lane),
            sigma: Sigma::Keep,
            accel: 0.0,
            committed: self.committed.is_some(),
            multiplicity: 0,
            fallback: false,
            side: None,
            costs: CostBreakdown::zero(),
            u: self.u,
            plan: PlanDiagnostics {
                cost: 0.0,
                zero_cost: 0.0,
                iterations: 0,
                du0: 0.0,
                degraded: false,
                monotone: true,
                in_bounds: true,
            },
            field: 0.0,
            min_distance: self.min_distance(),
            others: self
                .others
                .iter()
                .map(|o| {
                    let (x, y) = road.to_global(o.station, o.offset);
                    OtherSample { station: o.station, offset: o.offset, x, y, speed: o.speed, accel: o.accel }
                })
                .collect(),
        }
    }

    /// One closed-loop step; the returned row describes the state at the start of the step
    /// together with the decisions applied over it.
    fn step(&mut self, k: usize) -> Result<TraceRow, (TraceRow, SimError)> {
        let road = &self.cfg.road;
        let f = road.to_frenet(self.ego.x, self.ego.y);
        let mut row = self.row(k, f.station, f.offset);
        let fail = |row: &TraceRow, e: SimError| (row.clone(), e);
        if !road.contains_station(f.station) {
            let e = SimError::Aborted { time: row.time, reason: format!("ego left the road at station {:.2}", f.station) };
            return Err(fail(&row, e));
        }

        let sol = self.decide(f.station, f.offset).map_err(|e| fail(&row, e))?;
        if self.committed.is_none() && sol.ego_action.sigma != Sigma::Keep {
            let target = sol
                .ego_action
                .sigma
                .target_lane(self.lane, road.lane_count)
                .expect("feasible lane change");
            self.committed = Some((sol.ego_action.sigma, target));
        }
        for o in self.others.iter_mut() {
            o.accel = 0.0;
        }
        for &(i, a) in sol.ac_actions.iter().chain(&sol.bystander_actions) {
            self.others[i].accel = a;
        }
        row.sigma = sol.ego_action.sigma;
        row.accel = sol.ego_action.accel;
        row.committed = self.committed.is_some();
        row.target_lane = self.committed.map(|(_, t)| t).unwrap_or(self.lane);
        row.multiplicity = sol.multiplicity;
        row.fallback = sol.fallback;
        row.side = sol.side;
        row.costs = sol.ego_cost;
        for (sample, o) in row.others.iter_mut().zip(&self.others) {
            sample.accel = o.accel;
        }

        let obstacles = self.obstacles();
        row.field = total_field(self.ego.x, self.ego.y, &obstacles, road, &self.cfg.field).map_err(|e| fail(&row, e.into()))?;
        let plan = self.plan(row.target_lane, row.accel, &obstacles).map_err(|e| fail(&row, e))?;
        row.plan = self.diagnostics(&plan);
        self.u = plan.u_applied;
        row.u = self.u;

        let driver = self.style.profile().driver;
        let input = ControlInput { preview_y: self.u, accel: row.accel };
        let next = step(&self.ego, &input, self.cfg.dt, &self.cfg.vehicle, &driver).map_err(|e| fail(&row, e.into()))?;
        if next.clamped {
            let e = SimError::Aborted { time: row.time, reason: "ego speed fell to the model floor".into() };
            return Err(fail(&row, e));
        }
        self.ego = next.state;
        self.advance_others();

        if let Some((_, target)) = self.committed {
            let f = road.to_frenet(self.ego.x, self.ego.y);
            let lateral = f.offset - road.lane_center(target);
            let yaw = wrap_angle(self.ego.yaw - road.heading_at(f.station));
            if lateral.abs() < self.cfg.completion.lateral && yaw.abs() < self.cfg.completion.yaw {
                self.lane = target;
                self.committed = None;
            }
        }
        Ok(row)
    }
}

/// Runs a scenario with the given ego style and game strategy.
///
/// Configuration errors are returned as `Err`; failures during the run stop it and are
/// reported through [`TraceLog::aborted`] together with the rows computed so far.
pub fn run_simulation(cfg: &ScenarioConfig, style: DrivingStyle, strategy: EquilibriumKind) -> Result<TraceLog, SimError> {
    let mut sim = Sim::new(cfg, style, strategy)?;
    let steps = (cfg.duration / cfg.dt).round() as usize;
    let mut rows = Vec::with_capacity(steps);
    let mut aborted = None;
    for k in 0..steps {
        match sim.step(k) {
            Ok(row) => rows.push(row),
            Err((row, e)) => {
                rows.push(row);
                aborted = Some(e.to_string());
                break;
            }
        }
    }
    Ok(TraceLog {
        scenario: cfg.name.clone(),
        style,
        strategy,
        dt: cfg.dt,
        roles: sim.roles,
        rows,
        aborted,
    })
}
