//! The run loop.
//!
//! Each step: pick the controller for the active stage, compute the joint
//! command from the controller's model, clip it, add actuator noise, advance
//! the plant by one RK4 step, then let the gait state machine react to the
//! new state.

use serde::Serialize;

use super::scenario::{NoiseLevel, Scenario};
use super::trace::{Record, Summary, Trace};
use crate::analysis::{grip_margin, local_components, ProcessNoise};
use crate::control::{
    body_computed_torque, clip, distribute_wrench, end_effector_pd, is_saturated,
    torques_from_contact_forces,
};
use crate::dynamics::{contact_forces_from_torques, step, JointCommand, RobotState, Stage};
use crate::frames::{unit, Wrench};
use crate::gait::{self, GaitStatus, Waypoint};
use crate::kinematics::{grasp_maps, AnchorSet, BoomJointState, GraspMaps};
use crate::{Error, Result, Vec2, NUM_BOOMS};

fn at(time: f64) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::AtTime { .. } => e,
        other => Error::AtTime {
            time,
            source: Box::new(other),
        },
    }
}

/// Joint command for the active stage, before clipping, with the grasp maps
/// it was computed from.
pub fn stage_command(
    scenario: &Scenario,
    state: &RobotState,
    status: &GaitStatus,
    waypoint: &Waypoint,
    anchors: &AnchorSet,
) -> Result<(JointCommand, GraspMaps)> {
    let model = &scenario.model;
    let maps = grasp_maps(&state.body, &state.joints, &model.booms, anchors)?;
    let cmd = match gait::select_controller(status) {
        gait::Controller::Body => {
            let target = gait::body_target(waypoint).expect("body stage has a body waypoint");
            body_computed_torque(
                state,
                &maps,
                &target,
                &scenario.body_gains,
                &model.body,
                scenario.pretension,
            )?
        }
        gait::Controller::EndEffector(i) => {
            // The anchored booms hold the body against gravity.
            let p = &model.body;
            let hold = Wrench::new(-(p.mass * state.body.rotation().transpose() * p.gravity), 0.0);
            let x = distribute_wrench(&maps, &hold, scenario.pretension)?;
            let mut cmd = torques_from_contact_forces(&maps, &x);
            let target = gait::end_effector_target(waypoint, &state.body, model, anchors)?
                .expect("end-effector stage has an end-effector waypoint");
            let (f_b, tau) = end_effector_pd(&state.joints[i], &target, &scenario.end_effector_gains);
            cmd.f_b[i] = f_b;
            cmd.tau_theta[i] = tau;
            cmd
        }
    };
    Ok((cmd, maps))
}

/// The absolute noise level for a scenario. A level relative to the median
/// command is resolved against the noise-free run.
pub fn resolve_sigma(scenario: &Scenario) -> Result<f64> {
    match scenario.noise {
        NoiseLevel::Absolute(s) => Ok(s),
        NoiseLevel::FractionOfMedian(f) => {
            if f == 0.0 {
                return Ok(0.0);
            }
            let baseline = simulate_with_sigma(scenario, 0.0)?;
            Ok(f * baseline.median_command())
        }
    }
}

/// Runs the scenario until the program finishes or the budget runs out.
pub fn simulate(scenario: &Scenario) -> Result<Trace> {
    simulate_with_sigma(scenario, resolve_sigma(scenario)?)
}

/// Like [`simulate`], but fails with `NonConvergent` if the program does
/// not finish within the budget.
pub fn run(scenario: &Scenario) -> Result<Trace> {
    let trace = simulate(scenario)?;
    if !trace.status.done {
        return Err(Error::NonConvergent {
            waypoint: trace.status.index,
            budget_s: scenario.budget,
            mass_kg: None,
        });
    }
    Ok(trace)
}

fn initial(scenario: &Scenario) -> Result<(RobotState, GaitStatus, AnchorSet)> {
    let model = &scenario.model;
    let mut anchors = scenario.anchors.clone();
    let mut state = RobotState::at_rest(
        scenario.initial_pose,
        model,
        &anchors,
        [BoomJointState::new(1.0, 0.0); NUM_BOOMS],
        Stage::BodyMove,
    )?;
    let status = gait::start(&scenario.program, &state, model, &anchors)?;
    if status.attached != anchors.attached() {
        anchors = anchors.with_attachments(status.attached)?;
    }
    gait::apply_transition(&mut state, &status);
    Ok((state, status, anchors))
}

fn record(
    time: f64,
    state: &RobotState,
    commands: [JointCommand; 3],
    saturated: bool,
    contact: crate::Stacked,
    status: &GaitStatus,
    error: gait::WaypointError,
) -> Record {
    let v = state.world_velocity();
    Record {
        time,
        body: state.body,
        velocity: [v.x, v.y],
        omega: state.vel.w,
        joints: state.joints,
        commanded: commands[0],
        clipped: commands[1],
        applied: commands[2],
        saturated,
        contact,
        waypoint: status.index,
        stage: state.stage,
        attached: status.attached,
        error,
    }
}

/// Runs with an explicit absolute noise level.
pub fn simulate_with_sigma(scenario: &Scenario, sigma: f64) -> Result<Trace> {
    let program = &scenario.program;
    let model = &scenario.model;
    let plant = scenario.plant_model();
    let dt = scenario.dt;
    let (mut state, mut status, mut anchors) = initial(scenario).map_err(at(0.0))?;
    let mut noise = ProcessNoise::new(&scenario.noise_spec(sigma))?;
    let max_steps = scenario.max_steps();
    let mut records = Vec::with_capacity(max_steps.min(1 << 16) + 1);

    let mut k = 0;
    while k < max_steps && !status.done {
        let t = k as f64 * dt;
        let wp = &program.waypoints()[status.index];
        let (commanded, maps) =
            stage_command(scenario, &state, &status, wp, &anchors).map_err(at(t))?;
        let clipped = clip(&commanded, &scenario.limits);
        let applied = noise.perturb(&clipped);
        let contact = contact_forces_from_torques(&maps, &applied).map_err(at(t))?;
        let error = gait::waypoint_error(wp, &state, model, &anchors);
        records.push(record(
            t,
            &state,
            [commanded, clipped, applied],
            is_saturated(&commanded, &scenario.limits),
            contact,
            &status,
            error,
        ));

        state = step(&state, &applied, &plant, &anchors, dt).map_err(at(t))?;
        k += 1;
        let t = k as f64 * dt;
        let next = gait::advance(&status, &state, program, model, &anchors).map_err(at(t))?;
        if next != status {
            if next.attached != status.attached {
                anchors = anchors.with_attachments(next.attached).map_err(at(t))?;
            }
            gait::apply_transition(&mut state, &next);
            status = next;
        }
    }

    let last = &program.waypoints()[status.index.min(program.len() - 1)];
    let error = gait::waypoint_error(last, &state, model, &anchors);
    let zero = JointCommand::zero();
    records.push(record(
        k as f64 * dt,
        &state,
        [zero; 3],
        false,
        crate::Stacked::zeros(),
        &status,
        error,
    ));
    Ok(Trace {
        dt,
        waypoint_count: program.len(),
        thresholds: *program.thresholds(),
        records,
        status,
        sigma,
    })
}

/// Re-integrates the plant over the recorded applied commands, following the
/// recorded stages and attachments. Returns one state per record.
pub fn replay(scenario: &Scenario, trace: &Trace) -> Result<Vec<RobotState>> {
    let plant = scenario.plant_model();
    let (mut state, _, mut anchors) = initial(scenario)?;
    let mut out = Vec::with_capacity(trace.records.len());
    for (k, r) in trace.records.iter().enumerate() {
        if r.attached != anchors.attached() {
            anchors = anchors.with_attachments(r.attached)?;
        }
        if state.stage != r.stage {
            if let Stage::EndEffectorMove(_) = r.stage {
                state.vel = crate::frames::Twist::zero();
            }
            state.stage = r.stage;
        }
        out.push(state);
        if k + 1 < trace.records.len() {
            state = step(&state, &r.applied, &plant, &anchors, trace.dt)?;
        }
    }
    Ok(out)
}

/// Compact summary of a finished or truncated run.
pub fn summarize(scenario: &Scenario, trace: &Trace) -> Summary {
    let mut max_t = f64::NEG_INFINITY;
    let mut min_t = f64::INFINITY;
    let mut violations = 0;
    for r in trace.steps() {
        let mut violated = false;
        for (i, q) in r.joints.iter().enumerate() {
            let Some(a) = r.attached[i] else { continue };
            let x = Vec2::new(r.contact[2 * i], r.contact[2 * i + 1]);
            let tension = -unit(r.body.angle() + q.theta).dot(&x);
            max_t = max_t.max(tension);
            min_t = min_t.min(tension);
            let (f_t, f_n) = local_components(&x, &scenario.anchors.anchors()[a].normal);
            violated |= grip_margin(f_t, f_n, &scenario.grip) < 0.0;
        }
        if violated && r.stage == Stage::BodyMove {
            violations += 1;
        }
    }
    let last = trace.records.last().expect("a trace has at least one record");
    Summary {
        completed: trace.status.done,
        final_waypoint: trace.status.index,
        waypoint_count: trace.waypoint_count,
        final_time_s: trace.final_time(),
        steps: trace.steps().len(),
        final_error: last.error,
        response_times_s: super::response_time(trace).ok(),
        saturated_fraction: trace.saturated_fraction(),
        max_tension_n: if max_t.is_finite() { max_t } else { 0.0 },
        min_tension_n: if min_t.is_finite() { min_t } else { 0.0 },
        grip_violation_steps: violations,
        sigma: trace.sigma,
    }
}

/// Body-position deviation of a run from a reference run of the same
/// scenario during body moves. Each body-move segment is compared with the
/// baseline segment for the same waypoint, aligned at activation; past the
/// end of the baseline segment its last pose is held. Aligning per segment
/// keeps timing drift from earlier waypoints out of the measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub max_m: f64,
    pub mean_m: f64,
    /// Per body-move segment of `trace`: means over its first and last
    /// fifth, of the deviation and of the distance to the waypoint.
    pub segments: Vec<SegmentDeviation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SegmentDeviation {
    pub waypoint: usize,
    pub start_mean_m: f64,
    pub end_mean_m: f64,
    pub start_error_m: f64,
    pub end_error_m: f64,
}

type Segment = (usize, Vec<Vec2>, Vec<f64>);

fn body_segments(trace: &Trace) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for r in trace.steps() {
        if r.stage != Stage::BodyMove {
            continue;
        }
        if out.last().is_none_or(|s| s.0 != r.waypoint) {
            out.push((r.waypoint, Vec::new(), Vec::new()));
        }
        let seg = out.last_mut().expect("pushed above");
        seg.1.push(r.body.position());
        seg.2.push(r.error.position);
    }
    out
}

pub fn deviation_from(trace: &Trace, baseline: &Trace) -> Deviation {
    let base = body_segments(baseline);
    let mut all = Vec::new();
    let mut segments = Vec::new();
    for (w, poses, errors) in body_segments(trace) {
        let Some((_, reference, _)) = base.iter().find(|b| b.0 == w) else {
            continue;
        };
        let dev: Vec<f64> = poses
            .iter()
            .enumerate()
            .map(|(k, p)| (p - reference[k.min(reference.len() - 1)]).norm())
            .collect();
        let fifth = (dev.len() / 5).max(1);
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        segments.push(SegmentDeviation {
            waypoint: w,
            start_mean_m: mean(&dev[..fifth]),
            end_mean_m: mean(&dev[dev.len() - fifth..]),
            start_error_m: mean(&errors[..fifth]),
            end_error_m: mean(&errors[errors.len() - fifth..]),
        });
        all.extend(dev);
    }
    let n = all.len().max(1) as f64;
    Deviation {
        max_m: all.iter().copied().fold(0.0, f64::max),
        mean_m: all.iter().sum::<f64>() / n,
        segments,
    }
}
