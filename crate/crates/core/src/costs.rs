//! Lane-change decision costs for the ego car and the adjacent cars.
//!
//! Every candidate action is scored at the state reached after holding all
//! accelerations constant for the decision horizon. Safety combines a
//! longitudinal term against the lead car (lane keeping) and a lateral term
//! against the adjacent car of the target lane (lane changing); comfort
//! penalises longitudinal and estimated lateral acceleration; efficiency is the
//! squared deviation from the achievable lane speed.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::road::RoadGeometry;
use crate::style::CostWeights;

/// Lane-change behaviour: change left, keep, change right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sigma {
    Left,
    Keep,
    Right,
}

impl Sigma {
    pub const ALL: [Sigma; 3] = [Sigma::Left, Sigma::Keep, Sigma::Right];

    pub fn value(&self) -> i8 {
        match self {
            Sigma::Left => -1,
            Sigma::Keep => 0,
            Sigma::Right => 1,
        }
    }

    pub fn from_value(v: i8) -> Option<Self> {
        match v {
            -1 => Some(Sigma::Left),
            0 => Some(Sigma::Keep),
            1 => Some(Sigma::Right),
            _ => None,
        }
    }

    /// σ², the gate of the lateral terms.
    pub fn squared(&self) -> f64 {
        let s = self.value() as f64;
        s * s
    }

    /// Preference used to break exact ties: keep, then left, then right.
    pub fn tie_rank(&self) -> u8 {
        match self {
            Sigma::Keep => 0,
            Sigma::Left => 1,
            Sigma::Right => 2,
        }
    }

    /// Target lane index, if it is in `1..=lane_count`.
    pub fn target_lane(&self, lane: u8, lane_count: u8) -> Option<u8> {
        let t = lane as i16 + self.value() as i16;
        (1..=lane_count as i16).contains(&t).then_some(t as u8)
    }
}

impl fmt::Display for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionAction {
    pub sigma: Sigma,
    /// Longitudinal acceleration (m/s²).
    pub accel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostGains {
    pub kappa_v_lon: f64,
    pub kappa_s_lon: f64,
    pub kappa_v_lat: f64,
    pub kappa_s_lat: f64,
    pub kappa_ax: f64,
    pub kappa_ay: f64,
    /// Denominator guard (m²).
    pub epsilon: f64,
    /// Vehicle-length safety margin l_v (m).
    pub vehicle_margin: f64,
}

impl Default for CostGains {
    fn default() -> Self {
        Self {
            kappa_v_lon: 1.0,
            kappa_s_lon: 100.0,
            kappa_v_lat: 1.0,
            kappa_s_lat: 100.0,
            kappa_ax: 1.0,
            kappa_ay: 1.0,
            epsilon: 0.01,
            vehicle_margin: 5.0,
        }
    }
}

impl CostGains {
    pub fn validate(&self) -> Result<(), String> {
        let g = [
            self.kappa_v_lon,
            self.kappa_s_lon,
            self.kappa_v_lat,
            self.kappa_s_lat,
            self.kappa_ax,
            self.kappa_ay,
        ];
        if g.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("cost gains must be finite and nonnegative".into());
        }
        if !(self.epsilon > 0.0 && self.vehicle_margin > 0.0) {
            return Err("epsilon and vehicle_margin must be positive".into());
        }
        Ok(())
    }
}

/// Parameters of the decision layer beyond the raw gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionConfig {
    pub gains: CostGains,
    /// Constant-acceleration look-ahead at which costs are evaluated (s).
    pub horizon: f64,
    /// Duration of the sinusoidal lane change used for the lateral-acceleration estimate (s).
    pub lane_change_time: f64,
    /// Fixed part of the lane-end margin (m); lane keeping on a terminating lane is
    /// infeasible once the remaining length is below `speed * lane_change_time + lane_end_margin`.
    pub lane_end_margin: f64,
    /// Braking level (m/s²) a vehicle staying on a terminating lane must be able to stop
    /// with before the lane end, checked at the end of the look-ahead. Zero disables it.
    pub lane_end_decel: f64,
    /// When set, a lead car farther ahead than the follower's time headway times its speed
    /// does not cap the follower's reference speed.
    pub headway_range: bool,
    /// Number of intervals the look-ahead is split into for the safety terms; the worst
    /// sample counts. Zero evaluates safety at the end of the look-ahead only.
    pub safety_samples: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            gains: CostGains::default(),
            horizon: 3.0,
            lane_change_time: 3.0,
            lane_end_margin: 30.0,
            lane_end_decel: 0.0,
            headway_range: false,
            safety_samples: 6,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.gains.validate()?;
        if !(self.horizon > 0.0 && self.lane_change_time > 0.0) {
            return Err("horizon and lane_change_time must be positive".into());
        }
        if !(self.lane_end_margin >= 0.0 && self.lane_end_decel >= 0.0) {
            return Err("lane-end margin and deceleration must be nonnegative".into());
        }
        Ok(())
    }

    /// Peak lateral acceleration of a sinusoidal lane change of `width` over `lane_change_time`.
    pub fn lateral_accel_estimate(&self, width: f64) -> f64 {
        2.0 * PI * width / (self.lane_change_time * self.lane_change_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub safety: f64,
    pub comfort: f64,
    pub efficiency: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub const INFEASIBLE: CostBreakdown = CostBreakdown {
        safety: f64::INFINITY,
        comfort: f64::INFINITY,
        efficiency: f64::INFINITY,
        total: f64::INFINITY,
    };

    pub fn weighted(safety: f64, comfort: f64, efficiency: f64, w: &CostWeights) -> Self {
        Self {
            safety,
            comfort,
            efficiency,
            total: w.safety * safety + w.comfort * comfort + w.efficiency * efficiency,
        }
    }

    pub fn zero() -> Self {
        Self {
            safety: 0.0,
            comfort: 0.0,
            efficiency: 0.0,
            total: 0.0,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.total.is_finite()
    }
}

/// Position and longitudinal speed of a vehicle in global coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematic {
    pub x: f64,
    pub y: f64,
    pub v: f64,
}

impl Kinematic {
    pub fn distance(&self, other: &Kinematic) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// `κ_v·λ·Δv² + κ_s/(Δs² + ε)` with `λ = 1` iff `Δv < 0` and `Δs = max(d − l_v, 0)`.
fn interaction_cost(dv: f64, distance: f64, kappa_v: f64, kappa_s: f64, gains: &CostGains) -> f64 {
    let gate = if dv < 0.0 { 1.0 } else { 0.0 };
    let gap = (distance - gains.vehicle_margin).max(0.0);
    kappa_v * gate * dv * dv + kappa_s / (gap * gap + gains.epsilon)
}

/// Safety cost against the lead car of the current lane; zero without a lead car.
pub fn longitudinal_safety_cost(ego: &Kinematic, lead: Option<&Kinematic>, gains: &CostGains) -> f64 {
    match lead {
        Some(lead) => interaction_cost(
            lead.v - ego.v,
            ego.distance(lead),
            gains.kappa_v_lon,
            gains.kappa_s_lon,
            gains,
        ),
        None => 0.0,
    }
}

/// Safety cost against the adjacent car of the target lane `lane + σ`.
///
/// The speed term penalises closing speed: `v_ego − v_ac` when the adjacent car is
/// behind, `v_ac − v_ego` when it is ahead.
///
/// Returns `None` when the target lane does not exist (infeasible action). The
/// value is ungated: callers multiply it by σ².
pub fn lateral_safety_cost(
    ego: &Kinematic,
    adjacent: Option<&Kinematic>,
    adjacent_ahead: bool,
    lane: u8,
    sigma: Sigma,
    lane_count: u8,
    gains: &CostGains,
) -> Option<f64> {
    sigma.target_lane(lane, lane_count)?;
    Some(match adjacent {
        Some(ac) => interaction_cost(
            if adjacent_ahead { ac.v - ego.v } else { ego.v - ac.v },
            ego.distance(ac),
            gains.kappa_v_lat,
            gains.kappa_s_lat,
            gains,
        ),
        None => 0.0,
    })
}

pub fn comfort_cost(accel: f64, lateral_accel: f64, sigma: Sigma, gains: &CostGains) -> f64 {
    gains.kappa_ax * accel * accel + sigma.squared() * gains.kappa_ay * lateral_accel * lateral_accel
}

/// Lead car and adjacent car seen from the ego on one lane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneView {
    pub lead: Option<Kinematic>,
    pub adjacent: Option<Kinematic>,
    /// Lane speed limit (m/s).
    pub speed_limit: f64,
}

/// Per-lane neighbourhood of the ego, lane 1 first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborView {
    pub lanes: Vec<LaneView>,
}

impl NeighborView {
    pub fn lane(&self, lane: u8) -> Option<&LaneView> {
        (lane as usize).checked_sub(1).and_then(|i| self.lanes.get(i))
    }

    /// `min(v_max, v_LC)` for the lane; the lane limit alone without a lead car.
    pub fn reference_speed(&self, lane: u8) -> f64 {
        let Some(view) = self.lane(lane) else {
            return f64::NAN;
        };
        match view.lead {
            Some(lead) => view.speed_limit.min(lead.v),
            None => view.speed_limit,
        }
    }
}

pub fn efficiency_cost(v_ego: f64, lane: u8, neighbors: &NeighborView) -> f64 {
    let d = v_ego - neighbors.reference_speed(lane);
    d * d
}

/// One vehicle at the decision instant, in road coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Agent {
    pub lane: u8,
    pub station: f64,
    pub offset: f64,
    pub speed: f64,
    /// Time headway of the driver (s), see [`DecisionConfig::headway_range`].
    pub headway: f64,
}

impl Agent {
    /// Constant-acceleration rollout; a vehicle that would reverse stops instead.
    pub fn propagate(&self, accel: f64, t: f64) -> (f64, f64) {
        let v = self.speed + accel * t;
        if v >= 0.0 || accel >= 0.0 {
            (self.station + self.speed * t + 0.5 * accel * t * t, v)
        } else {
            let t_stop = -self.speed / accel;
            (self.station + 0.5 * self.speed * t_stop, 0.0)
        }
    }
}

/// Snapshot of the traffic around the ego for one decision epoch.
///
/// `others` holds every non-ego vehicle together with the acceleration assumed for
/// it when it is not an active player of the game.
#[derive(Debug, Clone)]
pub struct DecisionScene<'a> {
    pub road: &'a RoadGeometry,
    pub config: &'a DecisionConfig,
    pub ego: Agent,
    pub others: Vec<Agent>,
    pub default_accels: Vec<f64>,
    /// Speed limit of each lane, lane 1 first.
    pub speed_limits: Vec<f64>,
}

/// Accelerations of the game players for one joint action: `(index into others, accel)`.
pub type OpponentAccels<'a> = &'a [(usize, f64)];

/// Positions of all vehicles at one instant of the look-ahead.
struct Snapshot {
    time: f64,
    ego: Kinematic,
    ego_station: f64,
    others: Vec<(Kinematic, f64)>,
}

impl<'a> DecisionScene<'a> {
    fn accel_of(&self, idx: usize, opponents: OpponentAccels) -> f64 {
        opponents
            .iter()
            .find(|(i, _)| *i == idx)
            .map(|(_, a)| *a)
            .unwrap_or(self.default_accels[idx])
    }

    fn kinematic(&self, station: f64, offset: f64, v: f64) -> Kinematic {
        let (x, y) = self.road.to_global(station, offset);
        Kinematic { x, y, v }
    }

    /// Sample instants of the look-ahead: the present instant, then `safety_samples` evenly
    /// spaced instants up to the horizon. Zero samples means the horizon only.
    fn sample_times(&self) -> Vec<f64> {
        let t = self.config.horizon;
        let n = self.config.safety_samples;
        if n == 0 {
            return vec![t];
        }
        (0..=n).map(|k| t * k as f64 / n as f64).collect()
    }

    /// Ego lateral offset `t` seconds into a lane change toward `target_offset`.
    fn ego_offset(&self, target_offset: f64, t: f64) -> f64 {
        let tau = (t / self.config.lane_change_time).clamp(0.0, 1.0);
        let shape = tau - (2.0 * PI * tau).sin() / (2.0 * PI);
        self.ego.offset + (target_offset - self.ego.offset) * shape
    }

    fn snapshot(&self, target_offset: f64, ego_accel: f64, opponents: OpponentAccels, t: f64) -> Snapshot {
        let (s, v) = self.ego.propagate(ego_accel, t);
        let ego = self.kinematic(s, self.ego_offset(target_offset, t), v);
        let others = self
            .others
            .iter()
            .enumerate()
            .map(|(i, o)| {
                let (s, v) = o.propagate(self.accel_of(i, opponents), t);
                (self.kinematic(s, o.offset, v), s)
            })
            .collect();
        Snapshot {
            time: t,
            ego,
            ego_station: s,
            others,
        }
    }

    /// Nearest vehicle ahead of `station` on `lane` right now, excluding `skip`. Vehicles
    /// beyond the interaction range are not lead cars.
    pub fn lead_of(&self, lane: u8, station: f64, skip: Option<usize>) -> Option<usize> {
        self.others
            .iter()
            .enumerate()
            .filter(|(i, o)| Some(*i) != skip && o.lane == lane && o.station > station)
            .min_by(|a, b| a.1.station.total_cmp(&b.1.station))
            .map(|(i, _)| i)
    }

    /// Adjacent car of `lane`: the vehicle on that lane nearest to the ego along the road.
    pub fn adjacent_of(&self, lane: u8) -> Option<usize> {
        self.others
            .iter()
            .enumerate()
            .filter(|(_, o)| o.lane == lane)
            .min_by(|a, b| {
                let da = (a.1.station - self.ego.station).abs();
                let db = (b.1.station - self.ego.station).abs();
                da.total_cmp(&db)
            })
            .map(|(i, _)| i)
    }

    pub fn lane_limit(&self, lane: u8) -> f64 {
        self.speed_limits[(lane - 1) as usize]
    }

    /// Whether a vehicle on `lane` at `station` moving at `speed` can still stop before
    /// the lane ends when braking at `lane_end_decel`. Always true on through lanes or
    /// when the deceleration is zero.
    pub fn can_stop_before_end(&self, lane: u8, station: f64, speed: f64) -> bool {
        let b = self.config.lane_end_decel;
        match self.road.remaining_length(lane, station) {
            Some(rem) if b > 0.0 => speed * speed <= 2.0 * b * rem.max(0.0),
            _ => true,
        }
    }

    /// `min(v_max, v_LC)` for `follower` on `lane`, with the lead car's speed taken from
    /// `end`.
    fn reference_speed(&self, follower: &Agent, lane: u8, skip: Option<usize>, end: &Snapshot) -> f64 {
        let limit = self.lane_limit(lane);
        let range = if self.config.headway_range { follower.headway * follower.speed } else { f64::INFINITY };
        match self.lead_of(lane, follower.station, skip) {
            Some(i) if self.others[i].station - follower.station <= range => limit.min(end.others[i].0.v),
            _ => limit,
        }
    }

    fn lane_keeping_blocked(&self) -> bool {
        match self.road.remaining_length(self.ego.lane, self.ego.station) {
            Some(rem) => rem < self.ego.speed * self.config.lane_change_time + self.config.lane_end_margin,
            None => false,
        }
    }

    /// Whether `sigma` leads to a lane that exists now and is not about to end.
    pub fn sigma_feasible(&self, sigma: Sigma) -> bool {
        let Some(target) = sigma.target_lane(self.ego.lane, self.road.lane_count) else {
            return false;
        };
        if !self.road.lane_exists(target, self.ego.station) {
            return false;
        }
        if sigma == Sigma::Keep && self.lane_keeping_blocked() {
            return false;
        }
        true
    }

    /// Longitudinal safety of a follower against `lead_idx` over the samples. A lead car
    /// that the follower has driven through counts as contact.
    fn lead_cost(&self, snaps: &[Snapshot], follower: impl Fn(&Snapshot) -> (Kinematic, f64), lead_idx: usize, follower_now: f64) -> f64 {
        let gains = &self.config.gains;
        let ahead_now = self.others[lead_idx].station > follower_now;
        // the present gap and speed difference are the same for every acceleration; only
        // the future samples tell actions apart
        snaps
            .iter()
            .filter(|snap| snap.time > 0.0)
            .map(|snap| {
                let (me, my_station) = follower(snap);
                let (lead, lead_station) = snap.others[lead_idx];
                if ahead_now && lead_station <= my_station {
                    let contact = Kinematic { x: lead.x, y: lead.y, v: me.v };
                    longitudinal_safety_cost(&contact, Some(&lead), gains)
                } else {
                    longitudinal_safety_cost(&me, Some(&lead), gains)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Lateral safety of the ego against adjacent car `ac` over the samples.
    fn shared_lateral_cost(&self, snaps: &[Snapshot], ac: usize, sigma: Sigma) -> f64 {
        let gains = &self.config.gains;
        snaps
            .iter()
            .map(|snap| {
                let (other, station) = snap.others[ac];
                let ahead = station > snap.ego_station;
                lateral_safety_cost(&snap.ego, Some(&other), ahead, self.ego.lane, sigma, self.road.lane_count, gains)
                    .unwrap_or(f64::INFINITY)
            })
            .fold(0.0, f64::max)
    }

    fn rollout(&self, action: &DecisionAction, opponents: OpponentAccels) -> Option<(u8, Vec<Snapshot>)> {
        if !self.sigma_feasible(action.sigma) {
            return None;
        }
        let target = action.sigma.target_lane(self.ego.lane, self.road.lane_count)?;
        let offset = self.road.lane_center(target);
        let snaps = self
            .sample_times()
            .into_iter()
            .map(|t| self.snapshot(offset, action.accel, opponents, t))
            .collect();
        Some((target, snaps))
    }

    /// Ego cost of `action` against the given player accelerations.
    ///
    /// Safety terms are the worst case over the sampled look-ahead; efficiency is taken at
    /// its end.
    pub fn ego_cost(&self, action: &DecisionAction, opponents: OpponentAccels, weights: &CostWeights) -> CostBreakdown {
        let Some((target, snaps)) = self.rollout(action, opponents) else {
            return CostBreakdown::INFEASIBLE;
        };
        let end = snaps.last().expect("at least one sample");
        let gains = &self.config.gains;
        let s2 = action.sigma.squared();

        let lon = if action.sigma == Sigma::Keep {
            match self.lead_of(self.ego.lane, self.ego.station, None) {
                Some(i) => self.lead_cost(&snaps, |s| (s.ego, s.ego_station), i, self.ego.station),
                None => 0.0,
            }
        } else {
            0.0
        };
        let lat = match (action.sigma, self.adjacent_of(target)) {
            (Sigma::Keep, _) | (_, None) => 0.0,
            (sigma, Some(ac)) => self.shared_lateral_cost(&snaps, ac, sigma),
        };
        let safety = (s2 - 1.0).powi(2) * lon + s2 * lat;
        let a_y = self.config.lateral_accel_estimate(self.road.lane_width);
        let comfort = comfort_cost(action.accel, a_y, action.sigma, gains);
        if action.sigma == Sigma::Keep && !self.can_stop_before_end(target, end.ego_station, end.ego.v) {
            return CostBreakdown::INFEASIBLE;
        }
        let v_ref = self.reference_speed(&self.ego, target, None, end);
        let efficiency = (end.ego.v - v_ref).powi(2);
        CostBreakdown::weighted(safety, comfort, efficiency, weights)
    }

    /// Cost of adjacent car `ac` (index into `others`) accelerating at `ac_accel` while the
    /// ego plays `ego_action`.
    ///
    /// The adjacent car keeps its lane: its safety cost is the longitudinal term against
    /// its own lead car plus, when the ego moves into its lane, the ego's lateral term.
    pub fn ac_cost(
        &self,
        ac: usize,
        ac_accel: f64,
        ego_action: &DecisionAction,
        opponents: OpponentAccels,
        weights: &CostWeights,
    ) -> CostBreakdown {
        let mut accels: Vec<(usize, f64)> = opponents.iter().copied().filter(|(i, _)| *i != ac).collect();
        accels.push((ac, ac_accel));
        let Some((target, snaps)) = self.rollout(ego_action, &accels) else {
            return CostBreakdown::INFEASIBLE;
        };
        let end = snaps.last().expect("at least one sample");
        let gains = &self.config.gains;
        let agent = self.others[ac];

        let lon = match self.lead_of(agent.lane, agent.station, Some(ac)) {
            Some(i) => self.lead_cost(&snaps, |s| s.others[ac], i, agent.station),
            None => 0.0,
        };
        let shares_lane = ego_action.sigma != Sigma::Keep && target == agent.lane && self.adjacent_of(target) == Some(ac);
        let lat = if shares_lane {
            self.shared_lateral_cost(&snaps, ac, ego_action.sigma)
        } else {
            0.0
        };
        let safety = lon + ego_action.sigma.squared() * lat;
        let comfort = gains.kappa_ax * ac_accel * ac_accel;
        let me = end.others[ac].0;
        let mut v_ref = self.reference_speed(&agent, agent.lane, Some(ac), end);
        // an ego merging in ahead becomes the adjacent car's lead
        if shares_lane && self.ego.station > agent.station {
            let lead_station = self.lead_of(agent.lane, agent.station, Some(ac)).map(|i| self.others[i].station);
            if lead_station.is_none_or(|s| self.ego.station < s) {
                v_ref = self.lane_limit(agent.lane).min(end.ego.v);
            }
        }
        let efficiency = (me.v - v_ref).powi(2);
        CostBreakdown::weighted(safety, comfort, efficiency, weights)
    }
}
