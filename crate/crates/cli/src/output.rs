//! CSV writers. Floating-point values use `{:.16e}` (17 significant digits,
//! enough to round-trip every f64); integers are written as integers.

use std::fmt::Write;

use chemo_core::control::{IterationRecord, KnotSeries};
use chemo_core::grid::Grid1D;
use chemo_core::model::Species;
use chemo_core::stepper::Side;
use chemo_core::Trajectory;

use crate::Check;

pub const TRAJECTORY_HEADER: &str =
    "t,mass_N,mass_T,mass_I,mass_U,sup_N,sup_T,sup_I,sup_U,influx_U,clipped_total";
pub const SNAPSHOT_HEADER: &str = "t,cell_index,x,N,T,I,U";
pub const HISTORY_HEADER: &str = "iter,J,lambda_term,penalty,total,step_size,feasible_flag";
pub const CONTROL_HEADER: &str = "patch,knot_time,value";
pub const ENVELOPE_HEADER: &str = "j,t,mass_T,previous_mass_T,passed";

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per time level; with `stride > 1` only every `stride`-th level
/// and the final one are written.
pub fn trajectory_csv(trajectory: &Trajectory, stride: usize) -> String {
    let mut s = String::new();
    writeln!(s, "{TRAJECTORY_HEADER}").unwrap();
    let last = trajectory.records.len() - 1;
    for (n, r) in trajectory.records.iter().enumerate() {
        if n % stride.max(1) != 0 && n != last {
            continue;
        }
        let mut row = vec![num(r.t)];
        row.extend(r.mass.iter().map(|&m| num(m)));
        row.extend(r.sup.iter().map(|&m| num(m)));
        row.push(num(r.influx));
        row.push(num(r.clipped_total()));
        writeln!(s, "{}", row.join(",")).unwrap();
    }
    s
}

pub fn snapshots_csv(trajectory: &Trajectory, grid: &Grid1D) -> String {
    let mut s = String::new();
    writeln!(s, "{SNAPSHOT_HEADER}").unwrap();
    for snap in &trajectory.snapshots {
        for cell in 0..snap.state.cells() {
            let z = snap.state.at(cell);
            writeln!(
                s,
                "{},{cell},{},{},{},{},{}",
                num(snap.t),
                num(grid.center(cell)),
                num(z[Species::Normal.index()]),
                num(z[Species::Tumor.index()]),
                num(z[Species::Immune.index()]),
                num(z[Species::Drug.index()]),
            )
            .unwrap();
        }
    }
    s
}

pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut s = String::new();
    writeln!(s, "{HISTORY_HEADER}").unwrap();
    for rec in history {
        let r = &rec.report;
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            rec.iter,
            num(r.terminal_tumor),
            num(r.lambda_term),
            num(r.penalty),
            num(r.total),
            num(rec.step_size),
            u8::from(r.feasible)
        )
        .unwrap();
    }
    s
}

/// One row per side and interval; `knot_time` is the start of the interval.
pub fn control_csv(series: &KnotSeries) -> String {
    let mut s = String::new();
    writeln!(s, "{CONTROL_HEADER}").unwrap();
    for side in Side::BOTH {
        for (k, &value) in series.side(side).iter().enumerate() {
            writeln!(s, "{},{},{}", side.label(), num(series.knots()[k]), num(value)).unwrap();
        }
    }
    s
}

pub fn envelope_csv(series: &[(f64, f64)], interval: f64, first: usize, passed: &[bool]) -> String {
    let nearest = |t: f64| {
        series
            .iter()
            .min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
            .map(|p| p.1)
            .unwrap_or(f64::NAN)
    };
    let mut s = String::new();
    writeln!(s, "{ENVELOPE_HEADER}").unwrap();
    for (offset, ok) in passed.iter().enumerate() {
        let j = first.max(1) + offset;
        let t = j as f64 * interval;
        writeln!(
            s,
            "{j},{},{},{},{}",
            num(t),
            num(nearest(t)),
            num(nearest(t - interval)),
            u8::from(*ok)
        )
        .unwrap();
    }
    s
}

pub fn validation_report(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let status = match c.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "INFO",
        };
        writeln!(s, "{status} {:<14} {}", c.name, c.detail).unwrap();
    }
    s
}
