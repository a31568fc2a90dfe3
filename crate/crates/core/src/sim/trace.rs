//! Run traces, response times and writers.

use std::io::{self, Write};

use serde::Serialize;

use crate::dynamics::{JointCommand, Stage};
use crate::frames::PlanarPose;
use crate::gait::{GaitStatus, Thresholds, WaypointError};
use crate::kinematics::BoomJointState;
use crate::{Error, Result, Stacked, NUM_BOOMS};

/// One simulation step. `commanded`, `clipped` and `applied` are the
/// controller output, its saturated form and what the plant received (with
/// noise); the plant holds `applied` until the next record. `waypoint` is
/// the index active when the command was computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Record {
    pub time: f64,
    pub body: PlanarPose,
    /// Wall-frame linear velocity.
    pub velocity: [f64; 2],
    pub omega: f64,
    pub joints: [BoomJointState; NUM_BOOMS],
    pub commanded: JointCommand,
    pub clipped: JointCommand,
    pub applied: JointCommand,
    pub saturated: bool,
    /// Anchor loads produced by `applied`, zero for free booms.
    pub contact: Stacked,
    pub waypoint: usize,
    pub stage: Stage,
    /// Anchor held by each boom while the command was applied.
    pub attached: [Option<usize>; NUM_BOOMS],
    pub error: WaypointError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub dt: f64,
    pub waypoint_count: usize,
    pub thresholds: Thresholds,
    pub records: Vec<Record>,
    pub status: GaitStatus,
    /// Absolute noise level used, in actuator units.
    pub sigma: f64,
}

impl Trace {
    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.time)
    }

    /// Records that carry a command (all but the terminal one).
    pub fn steps(&self) -> &[Record] {
        &self.records[..self.records.len().saturating_sub(1)]
    }

    pub fn saturated_fraction(&self) -> f64 {
        let steps = self.steps();
        if steps.is_empty() {
            return 0.0;
        }
        steps.iter().filter(|r| r.saturated).count() as f64 / steps.len() as f64
    }

    /// Time each waypoint became active, for the waypoints reached.
    pub fn activation_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for r in &self.records {
            while out.len() <= r.waypoint && out.len() < self.waypoint_count {
                out.push(r.time);
            }
        }
        out
    }

    /// Median magnitude of the non-zero applied joint efforts.
    pub fn median_command(&self) -> f64 {
        let mut mags: Vec<f64> = self
            .steps()
            .iter()
            .flat_map(|r| r.applied.to_vector().iter().map(|c| c.abs()).collect::<Vec<_>>())
            .filter(|&c| c > 0.0)
            .collect();
        if mags.is_empty() {
            return 0.0;
        }
        mags.sort_by(f64::total_cmp);
        let n = mags.len();
        if n % 2 == 1 {
            mags[n / 2]
        } else {
            0.5 * (mags[n / 2 - 1] + mags[n / 2])
        }
    }
}

/// Time from activation to satisfaction of every waypoint. The durations
/// partition the trace: they sum to its final time.
pub fn response_time(trace: &Trace) -> Result<Vec<f64>> {
    if !trace.status.done {
        return Err(Error::Incomplete {
            waypoint: trace.status.index,
        });
    }
    let mut starts = trace.activation_times();
    starts.push(trace.final_time());
    Ok(starts.windows(2).map(|w| w[1] - w[0]).collect())
}

fn stage_fields(stage: Stage) -> (&'static str, i64) {
    match stage {
        Stage::BodyMove => ("body", -1),
        Stage::EndEffectorMove(i) => ("end_effector", i as i64),
    }
}

/// Writes the trace as CSV, one row per `stride` records plus the final
/// record. Column names carry units.
pub fn write_csv<W: Write>(trace: &Trace, stride: usize, mut out: W) -> io::Result<()> {
    let stride = stride.max(1);
    let mut header: Vec<String> = [
        "time_s",
        "x_m",
        "y_m",
        "phi_rad",
        "vx_m_per_s",
        "vy_m_per_s",
        "omega_rad_per_s",
        "waypoint",
        "stage",
        "moving_boom",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for i in 0..NUM_BOOMS {
        header.extend([
            format!("b{i}_m"),
            format!("theta{i}_rad"),
            format!("b_dot{i}_m_per_s"),
            format!("theta_dot{i}_rad_per_s"),
        ]);
    }
    for kind in ["cmd", "clipped", "applied"] {
        for i in 0..NUM_BOOMS {
            header.push(format!("f_b{i}_{kind}_n"));
            header.push(format!("tau{i}_{kind}_n_m"));
        }
    }
    for i in 0..NUM_BOOMS {
        header.push(format!("contact{i}_x_n"));
        header.push(format!("contact{i}_y_n"));
    }
    header.extend(
        [
            "saturated",
            "err_position_m",
            "err_velocity_m_per_s",
            "err_angle_rad",
            "err_angular_velocity_rad_per_s",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    writeln!(out, "{}", header.join(","))?;

    let n = trace.records.len();
    for (k, r) in trace.records.iter().enumerate() {
        if k % stride != 0 && k + 1 != n {
            continue;
        }
        let (stage, boom) = stage_fields(r.stage);
        let p = r.body.position();
        let mut row: Vec<String> = vec![
            r.time.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            r.body.angle().to_string(),
            r.velocity[0].to_string(),
            r.velocity[1].to_string(),
            r.omega.to_string(),
            r.waypoint.to_string(),
            stage.to_string(),
            boom.to_string(),
        ];
        for q in &r.joints {
            row.extend([q.b, q.theta, q.b_dot, q.theta_dot].map(|v| v.to_string()));
        }
        for c in [&r.commanded, &r.clipped, &r.applied] {
            row.extend(c.to_vector().iter().map(|v| v.to_string()));
        }
        row.extend(r.contact.iter().map(|v| v.to_string()));
        row.push(u8::from(r.saturated).to_string());
        row.extend(
            [
                r.error.position,
                r.error.velocity,
                r.error.angle,
                r.error.angular_velocity,
            ]
            .map(|v| v.to_string()),
        );
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}

/// Compact run summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub completed: bool,
    pub final_waypoint: usize,
    pub waypoint_count: usize,
    pub final_time_s: f64,
    pub steps: usize,
    pub final_error: WaypointError,
    pub response_times_s: Option<Vec<f64>>,
    pub saturated_fraction: f64,
    pub max_tension_n: f64,
    pub min_tension_n: f64,
    /// Steps in a body move where some anchor load left the grip cone.
    pub grip_violation_steps: usize,
    pub sigma: f64,
}
