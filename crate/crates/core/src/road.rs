//! Road geometry: a straight or constant-curvature reference line with parallel
//! lanes, expressed through station/offset (Frenet) coordinates.
//!
//! The reference line runs along the middle of the carriageway. Lane 1 is the
//! leftmost lane; lateral offsets are positive to the left.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::FieldError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Centerline {
    Straight,
    /// Constant-curvature arc; `radius` in metres.
    Arc { radius: f64, direction: TurnDirection },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminatingLane {
    pub lane: u8,
    /// Station (m) at which the lane ends.
    pub end_station: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadGeometry {
    pub centerline: Centerline,
    /// Global position of station 0 on the reference line.
    #[serde(default)]
    pub origin: [f64; 2],
    /// Reference-line heading at station 0 (rad).
    #[serde(default)]
    pub heading: f64,
    /// Length of the road (m).
    pub length: f64,
    pub lane_width: f64,
    pub lane_count: u8,
    #[serde(default)]
    pub terminating_lane: Option<TerminatingLane>,
}

/// A point in road coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frenet {
    pub station: f64,
    pub offset: f64,
}

/// A lane boundary at a given station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaneLine {
    pub offset: f64,
    pub is_edge: bool,
}

impl RoadGeometry {
    pub fn straight(length: f64, lane_width: f64, lane_count: u8) -> Self {
        Self {
            centerline: Centerline::Straight,
            origin: [0.0, 0.0],
            heading: 0.0,
            length,
            lane_width,
            lane_count,
            terminating_lane: None,
        }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |m: String| Err(FieldError::Geometry(m));
        if !(self.lane_width > 0.0 && self.lane_width.is_finite()) {
            return bad(format!("lane_width must be positive, got {}", self.lane_width));
        }
        if !(2..=3).contains(&self.lane_count) {
            return bad(format!("lane_count must be 2 or 3, got {}", self.lane_count));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if let Centerline::Arc { radius, .. } = self.centerline {
            let half_width = 0.5 * self.lane_width * self.lane_count as f64;
            if !(radius.is_finite() && radius > half_width) {
                return bad(format!("arc radius {radius} must exceed the half road width {half_width}"));
            }
            if self.length / radius >= PI {
                return bad("arc longer than a half circle is not supported".into());
            }
        }
        if let Some(t) = self.terminating_lane {
            if t.lane != 1 && t.lane != self.lane_count {
                return bad(format!("terminating lane {} must be an outer lane", t.lane));
            }
            if !(t.end_station > 0.0 && t.end_station < self.length) {
                return bad(format!("lane end station {} outside the road", t.end_station));
            }
        }
        Ok(())
    }

    /// Signed curvature (1/m), positive when the road turns left.
    pub fn curvature(&self) -> f64 {
        match self.centerline {
            Centerline::Straight => 0.0,
            Centerline::Arc { radius, direction: TurnDirection::Left } => 1.0 / radius,
            Centerline::Arc { radius, direction: TurnDirection::Right } => -1.0 / radius,
        }
    }

    fn tangent0(&self) -> [f64; 2] {
        [self.heading.cos(), self.heading.sin()]
    }

    fn normal0(&self) -> [f64; 2] {
        [-self.heading.sin(), self.heading.cos()]
    }

    /// Reference-line heading at a station.
    pub fn heading_at(&self, station: f64) -> f64 {
        self.heading + self.curvature() * station
    }

    pub fn to_global(&self, station: f64, offset: f64) -> (f64, f64) {
        let k = self.curvature();
        let [ox, oy] = self.origin;
        if k == 0.0 {
            let [tx, ty] = self.tangent0();
            let [nx, ny] = self.normal0();
            return (ox + station * tx + offset * nx, oy + station * ty + offset * ny);
        }
        let [nx, ny] = self.normal0();
        let (cx, cy) = (ox + nx / k, oy + ny / k);
        // angle of the origin as seen from the centre
        let theta0 = (oy - cy).atan2(ox - cx);
        let radius = 1.0 / k.abs();
        let rho = radius - k.signum() * offset;
        let theta = theta0 + k * station;
        (cx + rho * theta.cos(), cy + rho * theta.sin())
    }

    pub fn to_frenet(&self, x: f64, y: f64) -> Frenet {
        let k = self.curvature();
        let [ox, oy] = self.origin;
        let (dx, dy) = (x - ox, y - oy);
        if k == 0.0 {
            let [tx, ty] = self.tangent0();
            let [nx, ny] = self.normal0();
            return Frenet {
                station: dx * tx + dy * ty,
                offset: dx * nx + dy * ny,
            };
        }
        let [nx, ny] = self.normal0();
        let (cx, cy) = (ox + nx / k, oy + ny / k);
        let theta0 = (oy - cy).atan2(ox - cx);
        let theta = (y - cy).atan2(x - cx);
        let swept = wrap_angle(theta - theta0);
        let rho = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
        let radius = 1.0 / k.abs();
        Frenet {
            station: swept / k,
            offset: k.signum() * (radius - rho),
        }
    }

    pub fn contains_station(&self, station: f64) -> bool {
        (0.0..=self.length).contains(&station)
    }

    pub fn check_station(&self, station: f64) -> Result<(), FieldError> {
        if self.contains_station(station) {
            Ok(())
        } else {
            Err(FieldError::OffRoad {
                station,
                length: self.length,
            })
        }
    }

    /// Lateral offset of a lane centre.
    pub fn lane_center(&self, lane: u8) -> f64 {
        ((self.lane_count as f64 + 1.0) / 2.0 - lane as f64) * self.lane_width
    }

    /// Whether `lane` exists at `station` (terminating lanes vanish past their end).
    pub fn lane_exists(&self, lane: u8, station: f64) -> bool {
        if lane < 1 || lane > self.lane_count {
            return false;
        }
        match self.terminating_lane {
            Some(t) if t.lane == lane => station <= t.end_station,
            _ => true,
        }
    }

    /// Lane whose band contains `offset`, ignoring lane termination.
    pub fn lane_at_offset(&self, offset: f64) -> Option<u8> {
        let half = 0.5 * self.lane_count as f64 * self.lane_width;
        if offset > half || offset < -half {
            return None;
        }
        let idx = ((half - offset) / self.lane_width).floor() as i64 + 1;
        Some(idx.clamp(1, self.lane_count as i64) as u8)
    }

    /// Remaining length of a terminating lane ahead of `station`, if `lane` terminates.
    pub fn remaining_length(&self, lane: u8, station: f64) -> Option<f64> {
        match self.terminating_lane {
            Some(t) if t.lane == lane => Some(t.end_station - station),
            _ => None,
        }
    }

    /// Lane boundaries present at `station`, from left to right.
    pub fn lane_lines(&self, station: f64) -> Vec<LaneLine> {
        self.lane_line_iter(station).collect()
    }

    /// Same as [`lane_lines`](Self::lane_lines) without allocating.
    pub fn lane_line_iter(&self, station: f64) -> impl Iterator<Item = LaneLine> + '_ {
        let n = self.lane_count;
        let (first, last) = match self.terminating_lane {
            Some(t) if station > t.end_station && t.lane == 1 => (1, n),
            Some(t) if station > t.end_station && t.lane == n => (0, n - 1),
            _ => (0, n),
        };
        (first..=last).map(move |j| LaneLine {
            offset: (n as f64 / 2.0 - j as f64) * self.lane_width,
            is_edge: j == first || j == last,
        })
    }

    /// Lateral extent `(right, left)` of the drivable surface at `station`.
    pub fn lateral_extent(&self, station: f64) -> (f64, f64) {
        let lines = self.lane_lines(station);
        (lines[lines.len() - 1].offset, lines[0].offset)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut a = (a + PI).rem_euclid(2.0 * PI) - PI;
    if a <= -PI {
        a += 2.0 * PI;
    }
    a
}
