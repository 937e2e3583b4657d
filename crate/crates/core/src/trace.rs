//! Text output: trace CSV, metrics key-value files and comparison tables.

use std::io::{self, Write};

use crate::metrics::RunMetrics;
use crate::sim::TraceLog;

/// Formats a number with 9 significant digits, trailing zeros removed.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        return format!("{x:.8e}");
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub fn trace_header(trace: &TraceLog) -> Vec<String> {
    let mut cols: Vec<String> = [
        "step", "time", "x", "y", "vx", "vy", "yaw_rate", "yaw", "steer", "steer_rate", "station", "offset", "lane",
        "target_lane", "sigma", "accel", "committed", "multiplicity", "fallback", "side", "cost_safety",
        "cost_comfort", "cost_efficiency", "cost_total", "u", "plan_cost", "plan_zero_cost", "plan_iterations",
        "plan_du0", "plan_degraded", "field", "min_distance",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for role in &trace.roles {
        for f in ["station", "offset", "x", "y", "speed", "accel"] {
            cols.push(format!("{role}_{f}"));
        }
    }
    cols
}

/// Writes the trace as CSV with a fixed column order.
pub fn write_trace_csv(trace: &TraceLog, mut w: impl Write) -> io::Result<()> {
    writeln!(w, "{}", trace_header(trace).join(","))?;
    for r in &trace.rows {
        let e = &r.ego;
        let side = match r.side {
            Some(crate::game::Side::Left) => "left",
            Some(crate::game::Side::Right) => "right",
            None => "",
        };
        let mut f: Vec<String> = vec![r.step.to_string()];
        f.extend(
            [r.time, e.x, e.y, e.vx, e.vy, e.yaw_rate, e.yaw, e.steer, e.steer_rate, r.ego_station, r.ego_offset]
                .iter()
                .map(|v| sig9(*v)),
        );
        f.push(r.lane.to_string());
        f.push(r.target_lane.to_string());
        f.push(r.sigma.to_string());
        f.push(sig9(r.accel));
        f.push((r.committed as u8).to_string());
        f.push(r.multiplicity.to_string());
        f.push((r.fallback as u8).to_string());
        f.push(side.to_string());
        f.extend(
            [r.costs.safety, r.costs.comfort, r.costs.efficiency, r.costs.total, r.u, r.plan.cost, r.plan.zero_cost]
                .iter()
                .map(|v| sig9(*v)),
        );
        f.push(r.plan.iterations.to_string());
        f.push(sig9(r.plan.du0));
        f.push((r.plan.degraded as u8).to_string());
        f.push(sig9(r.field));
        f.push(sig9(r.min_distance));
        for o in &r.others {
            f.extend([o.station, o.offset, o.x, o.y, o.speed, o.accel].iter().map(|v| sig9(*v)));
        }
        writeln!(w, "{}", f.join(","))?;
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(sig9).unwrap_or_else(|| "-".into())
}

/// Flat `key=value` lines.
pub fn metrics_lines(m: &RunMetrics) -> Vec<(String, String)> {
    let mut out = vec![
        ("t_c".to_string(), opt(m.t_c)),
        ("sigma".to_string(), m.sigma.map(|s| s.to_string()).unwrap_or_else(|| "-".into())),
        ("ego_speed_at_tc".to_string(), opt(m.ego_speed_at_tc)),
    ];
    for (role, g) in &m.gap_at_tc {
        out.push((format!("gap_at_tc.{role}"), sig9(*g)));
    }
    for (role, v) in &m.speed_at_tc {
        out.push((format!("speed_at_tc.{role}"), sig9(*v)));
    }
    out.extend([
        ("rms_safety".to_string(), sig9(m.rms_safety)),
        ("rms_comfort".to_string(), sig9(m.rms_comfort)),
        ("rms_efficiency".to_string(), sig9(m.rms_efficiency)),
        ("rms_total".to_string(), sig9(m.rms_total)),
        ("min_distance".to_string(), sig9(m.min_distance)),
        ("max_field".to_string(), sig9(m.max_field)),
        ("final_lane".to_string(), m.final_lane.to_string()),
        ("dominance_violations".to_string(), m.dominance_violations.to_string()),
        ("monotonicity_violations".to_string(), m.monotonicity_violations.to_string()),
        ("bound_violations".to_string(), m.bound_violations.to_string()),
        ("degraded_plans".to_string(), m.degraded_plans.to_string()),
        ("fallback_epochs".to_string(), m.fallback_epochs.to_string()),
        ("steps".to_string(), m.steps.to_string()),
        ("aborted".to_string(), m.aborted.clone().unwrap_or_else(|| "-".into())),
    ]);
    out
}

pub fn write_metrics(m: &RunMetrics, mut w: impl Write) -> io::Result<()> {
    for (k, v) in metrics_lines(m) {
        writeln!(w, "{k}={v}")?;
    }
    Ok(())
}

/// Comparison table with one row per run, columns as in `metrics_lines`.
pub fn write_comparison_csv(runs: &[(String, String, RunMetrics)], mut w: impl Write) -> io::Result<()> {
    let mut keys: Vec<String> = Vec::new();
    for (_, _, m) in runs {
        for (k, _) in metrics_lines(m) {
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
    }
    writeln!(w, "style,strategy,{}", keys.join(","))?;
    for (style, strategy, m) in runs {
        let lines = metrics_lines(m);
        let vals: Vec<String> = keys
            .iter()
            .map(|k| {
                lines
                    .iter()
                    .find(|(kk, _)| kk == k)
                    .map(|(_, v)| v.replace(',', ";"))
                    .unwrap_or_else(|| "-".into())
            })
            .collect();
        writeln!(w, "{style},{strategy},{}", vals.join(","))?;
    }
    Ok(())
}
