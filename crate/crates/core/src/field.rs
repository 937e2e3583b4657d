//! Collision-risk potential field: velocity-skewed obstacle terms plus a road
//! boundary term summed over lane lines.

use serde::{Deserialize, Serialize};

use crate::error::FieldError;
use crate::road::{Frenet, RoadGeometry};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleFieldParams {
    /// Peak value at the obstacle CoG.
    pub peak: f64,
    /// Longitudinal convergence length (m).
    pub rho_x: f64,
    /// Lateral convergence length (m).
    pub rho_y: f64,
    /// Shape exponent.
    pub shape: f64,
    /// Velocity skew gain (s/m).
    pub skew: f64,
}

impl Default for ObstacleFieldParams {
    fn default() -> Self {
        Self {
            peak: 50.0,
            rho_x: 8.0,
            rho_y: 1.2,
            shape: 1.0,
            skew: 0.0125,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadFieldParams {
    /// Peak road value.
    pub peak: f64,
    /// Safety threshold d† (m).
    pub safe_distance: f64,
    /// Vehicle width W (m).
    pub width: f64,
    /// Weight of interior (dashed) lane lines; edge lines always weigh 1.
    pub interior_line_weight: f64,
}

impl Default for RoadFieldParams {
    fn default() -> Self {
        Self {
            peak: 1.0,
            safe_distance: 0.2,
            width: 1.8,
            interior_line_weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    pub obstacle: ObstacleFieldParams,
    pub road: RoadFieldParams,
}

impl FieldParams {
    /// Field value on the boundary of the obstacle core, `a_oc / e`.
    pub fn critical_value(&self) -> f64 {
        self.obstacle.peak * (-1.0f64).exp()
    }

    pub fn validate(&self) -> Result<(), String> {
        let o = &self.obstacle;
        let r = &self.road;
        if !(o.peak > 0.0 && o.rho_x > 0.0 && o.rho_y > 0.0 && o.shape >= 1.0 && o.skew >= 0.0) {
            return Err(format!("invalid obstacle field parameters {o:?}"));
        }
        if !(r.peak > 0.0 && r.safe_distance >= 0.0 && r.width > 0.0 && r.interior_line_weight >= 0.0) {
            return Err(format!("invalid road field parameters {r:?}"));
        }
        Ok(())
    }
}

/// Pose and speed of an obstacle car.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl Obstacle {
    /// Constant-velocity, constant-heading extrapolation.
    pub fn advanced(&self, dt: f64) -> Self {
        Self {
            x: self.x + self.speed * self.heading.cos() * dt,
            y: self.y + self.speed * self.heading.sin() * dt,
            ..*self
        }
    }
}

pub fn obstacle_field(x: f64, y: f64, oc: &Obstacle, p: &ObstacleFieldParams) -> f64 {
    oriented_field(x, y, &OrientedObstacle::from(oc), p)
}

/// Obstacle with the sine and cosine of its heading cached, for repeated evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedObstacle {
    pub x: f64,
    pub y: f64,
    pub sin_h: f64,
    pub cos_h: f64,
    pub speed: f64,
}

impl From<&Obstacle> for OrientedObstacle {
    fn from(oc: &Obstacle) -> Self {
        let (sin_h, cos_h) = oc.heading.sin_cos();
        Self { x: oc.x, y: oc.y, sin_h, cos_h, speed: oc.speed }
    }
}

pub fn oriented_field(x: f64, y: f64, oc: &OrientedObstacle, p: &ObstacleFieldParams) -> f64 {
    let (dx, dy) = (x - oc.x, y - oc.y);
    let xh = oc.cos_h * dx + oc.sin_h * dy;
    let yh = -oc.sin_h * dx + oc.cos_h * dy;
    let qx = xh * xh / (2.0 * p.rho_x * p.rho_x);
    let qy = yh * yh / (2.0 * p.rho_y * p.rho_y);
    let q = qx + qy;
    // gamma is 0/0 at the CoG; its limit along the lateral axis is 0
    let gamma = if q > 0.0 {
        let k = if xh < 0.0 { -1.0 } else { 1.0 };
        k * qx / q.sqrt()
    } else {
        0.0
    };
    let core = if p.shape == 1.0 { q } else { q.powf(p.shape) };
    p.peak * (-core + p.skew * oc.speed * gamma).exp()
}

/// Road boundary field summed over the lane lines present at the query station.
pub fn road_field(x: f64, y: f64, road: &RoadGeometry, p: &RoadFieldParams) -> Result<f64, FieldError> {
    road_field_at(road.to_frenet(x, y), road, p)
}

/// [`road_field`] at a point already expressed in road coordinates.
pub fn road_field_at(f: Frenet, road: &RoadGeometry, p: &RoadFieldParams) -> Result<f64, FieldError> {
    road.check_station(f.station)?;
    Ok(road
        .lane_line_iter(f.station)
        .map(|line| {
            let w = if line.is_edge { 1.0 } else { p.interior_line_weight };
            if w == 0.0 {
                return 0.0;
            }
            let d = (f.offset - line.offset).abs();
            w * p.peak * (-d + p.safe_distance + 0.5 * p.width).exp()
        })
        .sum())
}

pub fn total_field(
    x: f64,
    y: f64,
    obstacles: &[Obstacle],
    road: &RoadGeometry,
    params: &FieldParams,
) -> Result<f64, FieldError> {
    let oc: f64 = obstacles.iter().map(|o| obstacle_field(x, y, o, &params.obstacle)).sum();
    Ok(oc + road_field(x, y, road, &params.road)?)
}

/// Obstacle-only part of the field.
pub fn obstacle_sum(x: f64, y: f64, obstacles: &[Obstacle], params: &ObstacleFieldParams) -> f64 {
    obstacles.iter().map(|o| obstacle_field(x, y, o, params)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oc(speed: f64) -> Obstacle {
        Obstacle { x: 10.0, y: 2.0, heading: 0.0, speed }
    }

    #[test]
    fn peak_at_cog() {
        let p = ObstacleFieldParams::default();
        assert_eq!(obstacle_field(10.0, 2.0, &oc(20.0), &p), p.peak);
    }

    #[test]
    fn static_field_is_symmetric() {
        let p = ObstacleFieldParams::default();
        for &(dx, dy) in &[(3.0, 0.0), (7.5, 0.8), (0.3, -1.1)] {
            let fore = obstacle_field(10.0 + dx, 2.0 + dy, &oc(0.0), &p);
            let aft = obstacle_field(10.0 - dx, 2.0 + dy, &oc(0.0), &p);
            assert!((fore - aft).abs() <= 1e-12 * fore.max(1.0));
        }
    }

    #[test]
    fn closed_form_point() {
        let p = ObstacleFieldParams { shape: 1.0, ..Default::default() };
        let v = obstacle_field(10.0 + p.rho_x * 2f64.sqrt(), 2.0, &oc(0.0), &p);
        assert!((v - p.peak * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn moving_obstacle_skews_forward() {
        let p = ObstacleFieldParams::default();
        let fore = obstacle_field(16.0, 2.5, &oc(20.0), &p);
        let aft = obstacle_field(4.0, 2.5, &oc(20.0), &p);
        assert!(fore > aft);
    }

    #[test]
    fn road_field_closed_forms() {
        let road = RoadGeometry::straight(300.0, 4.0, 2);
        let p = RoadFieldParams::default();
        // on the left edge line (offset 4): that line contributes a_r e^{d† + W/2},
        // the right edge 8 m away adds its own tail
        let on_line = road_field(50.0, 4.0, &road, &p).unwrap();
        let edge = p.peak * (p.safe_distance + 0.5 * p.width).exp();
        let far = p.peak * (-8.0 + p.safe_distance + 0.5 * p.width).exp();
        assert!((on_line - edge - far).abs() < 1e-12);

        let d = p.safe_distance + 0.5 * p.width;
        let at_threshold = road_field(50.0, 4.0 - d, &road, &p).unwrap();
        let tail = p.peak * (-(8.0 - d) + d).exp();
        assert!((at_threshold - p.peak - tail).abs() < 1e-12);
    }

    #[test]
    fn road_field_off_domain() {
        let road = RoadGeometry::straight(300.0, 4.0, 2);
        assert!(matches!(
            road_field(-5.0, 0.0, &road, &RoadFieldParams::default()),
            Err(FieldError::OffRoad { .. })
        ));
    }

    #[test]
    fn total_is_a_plain_sum() {
        let road = RoadGeometry::straight(300.0, 4.0, 3);
        let params = FieldParams::default();
        let o = oc(15.0);
        let road_only = total_field(14.0, 1.0, &[], &road, &params).unwrap();
        let one = total_field(14.0, 1.0, &[o], &road, &params).unwrap();
        let two = total_field(14.0, 1.0, &[o, o], &road, &params).unwrap();
        assert_eq!(road_only, road_field(14.0, 1.0, &road, &params.road).unwrap());
        assert!(((two - road_only) - 2.0 * (one - road_only)).abs() < 1e-12);
    }

    #[test]
    fn interior_lines_weighted() {
        let road = RoadGeometry::straight(300.0, 4.0, 3);
        let mut p = RoadFieldParams::default();
        let base = road_field(50.0, 1.0, &road, &p).unwrap();
        p.interior_line_weight = 1.0;
        assert!(road_field(50.0, 1.0, &road, &p).unwrap() > base);
    }
}
