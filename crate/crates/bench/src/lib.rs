//! Fixtures shared by the benchmarks.

use lanegame::game::Bimatrix;
use lanegame::mpc::PlanningProblem;
use lanegame::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Row labels and columns of a full grid game: every σ with `n_accel` accelerations.
pub fn grid_game(n_accel: usize, n_cols: usize, seed: u64) -> (Vec<DecisionAction>, Vec<f64>, Bimatrix) {
    let mut rng = StdRng::seed_from_u64(seed);
    let accels: Vec<f64> = (0..n_accel).map(|i| -4.0 + 0.5 * i as f64).collect();
    let rows: Vec<DecisionAction> = Sigma::ALL
        .iter()
        .flat_map(|&sigma| accels.iter().map(move |&accel| DecisionAction { sigma, accel }))
        .collect();
    let cols: Vec<f64> = (0..n_cols).map(|i| -4.0 + 0.5 * i as f64).collect();
    let n = rows.len() * cols.len();
    let ego = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let ac = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let m = Bimatrix::new(rows.len(), cols.len(), ego, ac).expect("consistent shape");
    (rows, cols, m)
}

/// Owned inputs of a planning call: a car changing into the left lane behind a slower one.
pub struct PlanFixture {
    pub road: RoadGeometry,
    pub obstacles: Vec<Obstacle>,
    pub field: FieldParams,
    pub vehicle: VehicleParams,
    pub driver: DriverParams,
    pub config: MpcConfig,
    pub state: VehicleState,
}

impl PlanFixture {
    pub fn lane_change() -> Self {
        let road = RoadGeometry::straight(600.0, 4.0, 3);
        Self {
            obstacles: vec![Obstacle { x: 130.0, y: road.lane_center(1), heading: 0.0, speed: 15.0 }],
            state: VehicleState::straight(20.0, 100.0, road.lane_center(2)),
            road,
            field: FieldParams::default(),
            vehicle: VehicleParams::default(),
            driver: DrivingStyle::Normal.profile().driver,
            config: MpcConfig::default(),
        }
    }

    pub fn problem(&self) -> PlanningProblem<'_> {
        PlanningProblem {
            state: self.state,
            u_prev: self.state.y,
            accel: 0.0,
            target_lane: 1,
            road: &self.road,
            obstacles: &self.obstacles,
            field: &self.field,
            vehicle: &self.vehicle,
            driver: &self.driver,
            config: &self.config,
        }
    }
}
