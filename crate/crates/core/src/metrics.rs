//! Run summaries: commitment time, gaps and speeds at that time, RMS costs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costs::Sigma;
use crate::scenario::Role;
use crate::sim::TraceLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Time of the first committed lane change (s).
    pub t_c: Option<f64>,
    pub sigma: Option<Sigma>,
    /// Signed gap `s_EC − s_AC` along the road at `t_c`, per adjacent car (m).
    pub gap_at_tc: BTreeMap<Role, f64>,
    pub ego_speed_at_tc: Option<f64>,
    pub speed_at_tc: BTreeMap<Role, f64>,
    pub rms_safety: f64,
    pub rms_comfort: f64,
    pub rms_efficiency: f64,
    pub rms_total: f64,
    /// Smallest distance between any two vehicles over the run (m).
    pub min_distance: f64,
    /// Largest total field at the ego over the run.
    pub max_field: f64,
    pub final_lane: u8,
    /// Planning calls whose result was costlier than the zero sequence.
    pub dominance_violations: usize,
    pub monotonicity_violations: usize,
    pub bound_violations: usize,
    pub degraded_plans: usize,
    pub fallback_epochs: usize,
    pub steps: usize,
    pub aborted: Option<String>,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

pub fn summarize(trace: &TraceLog) -> RunMetrics {
    let rows = &trace.rows;
    let commit = rows.iter().find(|r| r.sigma != Sigma::Keep);
    let mut gap_at_tc = BTreeMap::new();
    let mut speed_at_tc = BTreeMap::new();
    if let Some(r) = commit {
        for (role, o) in trace.roles.iter().zip(&r.others) {
            if role.is_adjacent() {
                gap_at_tc.insert(*role, r.ego_station - o.station);
            }
            speed_at_tc.insert(*role, o.speed);
        }
    }
    RunMetrics {
        t_c: commit.map(|r| r.time),
        sigma: commit.map(|r| r.sigma),
        gap_at_tc,
        ego_speed_at_tc: commit.map(|r| r.ego.vx),
        speed_at_tc,
        rms_safety: rms(rows.iter().map(|r| r.costs.safety)),
        rms_comfort: rms(rows.iter().map(|r| r.costs.comfort)),
        rms_efficiency: rms(rows.iter().map(|r| r.costs.efficiency)),
        rms_total: rms(rows.iter().map(|r| r.costs.total)),
        min_distance: rows.iter().map(|r| r.min_distance).fold(f64::INFINITY, f64::min),
        max_field: rows.iter().map(|r| r.field).fold(0.0, f64::max),
        final_lane: rows.last().map(|r| r.lane).unwrap_or(0),
        dominance_violations: rows.iter().filter(|r| r.plan.cost > r.plan.zero_cost).count(),
        monotonicity_violations: rows.iter().filter(|r| !r.plan.monotone).count(),
        bound_violations: rows.iter().filter(|r| !r.plan.in_bounds).count(),
        degraded_plans: rows.iter().filter(|r| r.plan.degraded).count(),
        fallback_epochs: rows.iter().filter(|r| r.fallback).count(),
        steps: rows.len(),
        aborted: trace.aborted.clone(),
    }
}
