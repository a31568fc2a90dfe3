mod common;

use common::load;
use reachbot::dynamics::Stage;
use reachbot::gait::{GaitProgram, Waypoint};
use reachbot::sim::{
    replay, response_time, run, simulate, simulate_with_sigma, summarize, NoiseLevel, Scenario,
};
use reachbot::Error;

fn noisy_hallway(seed: u64) -> Scenario {
    let mut s = load("reference_hallway.toml");
    s.noise = NoiseLevel::Absolute(0.05);
    s.seed = seed;
    s
}

#[test]
fn shipped_scenarios_load() {
    for name in ["reference_hallway.toml", "trade_template.toml", "fos_symmetric.toml"] {
        let s = load(name);
        assert!(!s.name.is_empty(), "{name}");
    }
}

#[test]
fn fixed_seed_runs_are_bit_identical() {
    let a = simulate(&noisy_hallway(3)).unwrap();
    let b = simulate(&noisy_hallway(3)).unwrap();
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        let bits = |r: &reachbot::sim::Record| {
            let p = r.body.position();
            [p.x, p.y, r.body.angle(), r.applied.f_b[0], r.applied.tau_theta[3]].map(f64::to_bits)
        };
        assert_eq!(bits(x), bits(y));
    }
    assert_eq!(a, b);
    let c = simulate(&noisy_hallway(4)).unwrap();
    assert_ne!(a.records.len(), 0);
    assert_ne!(a, c);
}

#[test]
fn replaying_applied_commands_reproduces_the_trace() {
    let s = noisy_hallway(5);
    let trace = simulate(&s).unwrap();
    let states = replay(&s, &trace).unwrap();
    assert_eq!(states.len(), trace.records.len());
    let mut worst: f64 = 0.0;
    for (state, r) in states.iter().zip(&trace.records) {
        worst = worst.max((state.body.position() - r.body.position()).norm());
        worst = worst.max((state.body.angle() - r.body.angle()).abs());
        for (q, p) in state.joints.iter().zip(&r.joints) {
            worst = worst.max((q.b - p.b).abs()).max((q.theta - p.theta).abs());
        }
    }
    assert!(worst < 1e-12, "replay drift {worst:e}");
}

#[test]
fn trivial_program_finishes_in_one_step() {
    let mut s = load("reference_hallway.toml");
    let start = Waypoint::Body {
        position: s.initial_pose.position(),
        angle: s.initial_pose.angle(),
    };
    s.program = GaitProgram::new(vec![start], *s.program.thresholds(), &s.anchors).unwrap();
    let trace = run(&s).unwrap();
    assert!(trace.status.done);
    assert_eq!(trace.records.len(), 2);
    assert_eq!(trace.final_time(), s.dt);
    assert_eq!(response_time(&trace).unwrap(), vec![s.dt]);
}

#[test]
fn hallway_dispatches_every_waypoint_in_order() {
    let s = load("reference_hallway.toml");
    let trace = run(&s).unwrap();
    let waypoints = s.program.waypoints();
    assert_eq!(waypoints.len(), 14);

    let mut visited = Vec::new();
    for r in trace.steps() {
        if visited.last() != Some(&r.waypoint) {
            visited.push(r.waypoint);
        }
        let expected = match waypoints[r.waypoint] {
            Waypoint::Body { .. } => Stage::BodyMove,
            Waypoint::EndEffector { boom, .. } => Stage::EndEffectorMove(boom),
        };
        assert_eq!(r.stage, expected, "record at t = {}", r.time);
        let free = r.attached.iter().filter(|a| a.is_none()).count();
        assert_eq!(free, usize::from(r.stage != Stage::BodyMove));
    }
    assert_eq!(visited, (0..14).collect::<Vec<_>>());
    assert_eq!(trace.status.attached, [Some(5), Some(4), Some(10), Some(11)]);

    let summary = summarize(&s, &trace);
    assert!(summary.completed);
    assert_eq!(summary.response_times_s.unwrap().len(), 14);
    assert_eq!(summary.grip_violation_steps, 0);
}

#[test]
fn short_budget_is_non_convergent() {
    let mut s = load("reference_hallway.toml");
    s.budget = 1.0;
    match run(&s) {
        Err(Error::NonConvergent { waypoint: 0, .. }) => {}
        other => panic!("unexpected {other:?}"),
    }
    let partial = simulate_with_sigma(&s, 0.0).unwrap();
    assert_eq!(partial.records.len(), s.max_steps() + 1);
    assert!(response_time(&partial).is_err());
}
