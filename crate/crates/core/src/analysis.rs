//! Structural and robustness analysis.
//!
//! * Grip cone: the gripper holds a load whose normal component `f_n`
//!   (positive pushing into the wall) and tangential component `f_t` satisfy
//!   `f_n + f_o >= |f_t| / mu`, where `f_o >= 0` is the pull-out capacity.
//! * Factor of safety: for a static stance, the load needed to resist a
//!   disturbance is split over the anchors and each boom is checked for
//!   tensile yield, compressive failure (Euler buckling or the push limit,
//!   whichever is lower) and grip.
//! * Noise and model error for robustness runs, and the mass/response-time
//!   trade study.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::distribute_wrench;
use crate::dynamics::{BodyParams, JointCommand, RobotModel};
use crate::frames::{perp, PlanarPose, Wrench};
use crate::kinematics::{grasp_maps, inverse_kinematics, AnchorSet, BoomJointState, GraspMaps};
use crate::sim::{self, Scenario};
use crate::{Error, Result, Stacked, Vec2, NUM_BOOMS};

/// Reported factor when nothing loads a boom.
pub const FOS_SENTINEL: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GripModel {
    /// Static friction coefficient.
    pub mu: f64,
    /// Pull-out capacity along the outward normal (N).
    #[serde(rename = "pull_out_n")]
    pub f_o: f64,
}

impl Default for GripModel {
    fn default() -> Self {
        Self { mu: 1.0, f_o: 1000.0 }
    }
}

impl GripModel {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err("mu must be positive".into());
        }
        if !(self.f_o >= 0.0 && self.f_o.is_finite()) {
            return Err("pull-out capacity must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoomStructuralParams {
    #[serde(rename = "tensile_max_n")]
    pub f_tensile_max: f64,
    /// `E·I`; the critical load of a boom of length `b` is `E·I·π²/b²`.
    #[serde(rename = "buckling_stiffness_n_m2")]
    pub buckling_stiffness: f64,
    #[serde(rename = "push_max_n")]
    pub f_boom_push_max: f64,
}

impl Default for BoomStructuralParams {
    fn default() -> Self {
        Self {
            f_tensile_max: 500.0,
            buckling_stiffness: 50.0 / std::f64::consts::PI.powi(2),
            f_boom_push_max: 10.0,
        }
    }
}

impl BoomStructuralParams {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.f_tensile_max) && ok(self.buckling_stiffness) && ok(self.f_boom_push_max)) {
            return Err("structural limits must be positive".into());
        }
        Ok(())
    }

    pub fn critical_load(&self, length: f64) -> f64 {
        self.buckling_stiffness * std::f64::consts::PI.powi(2) / (length * length)
    }
}

/// Margin inside the grip cone for a load `(f_t, f_n)` in the local wall
/// frame. Non-negative inside.
pub fn grip_margin(f_t: f64, f_n: f64, grip: &GripModel) -> f64 {
    f_n + grip.f_o - f_t.abs() / grip.mu
}

/// Local wall-frame components `(f_t, f_n)` of an anchor load. `f_n` is along
/// the anchor's inward normal and `f_t` along the normal turned clockwise.
pub fn local_components(x: &Vec2, inward_normal: &Vec2) -> (f64, f64) {
    let tangent = -perp(inward_normal);
    (x.dot(&tangent), x.dot(inward_normal))
}

/// Axial tension (positive pulling) and lateral load of a boom.
pub fn boom_components(x: &Vec2, axis: &Vec2) -> (f64, f64) {
    (-axis.dot(x), perp(axis).dot(x))
}

/// Largest factor by which a grip load can be scaled and stay in the cone.
pub fn grip_factor(f_t: f64, f_n: f64, grip: &GripModel) -> f64 {
    let demand = f_t.abs() / grip.mu - f_n;
    if demand <= 0.0 {
        FOS_SENTINEL
    } else {
        (grip.f_o / demand).min(FOS_SENTINEL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    Unloaded,
    Yield,
    Buckling,
    Push,
    Grip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FosReport {
    pub value: f64,
    /// Governing boom, if any carries load.
    pub boom: Option<usize>,
    pub mode: FailureMode,
}

/// A stationary body with its booms on their anchors.
#[derive(Debug, Clone)]
pub struct Stance {
    pub body: PlanarPose,
    pub model: RobotModel,
    pub anchors: AnchorSet,
    pub joints: [BoomJointState; NUM_BOOMS],
    pub maps: GraspMaps,
}

impl Stance {
    pub fn new(body: PlanarPose, model: RobotModel, anchors: AnchorSet) -> Result<Self> {
        let ik = inverse_kinematics(&body, &model.booms, &anchors)?;
        let joints = std::array::from_fn(|i| ik[i].unwrap_or_default());
        let maps = grasp_maps(&body, &joints, &model.booms, &anchors)?;
        maps.ensure_full_rank()?;
        Ok(Self {
            body,
            model,
            anchors,
            joints,
            maps,
        })
    }

    /// Body-frame wrench the booms must supply to hold the body against a
    /// wall-frame disturbance acting at the centre of mass, plus gravity.
    pub fn required_wrench(&self, disturbance: &Wrench) -> Wrench {
        let p = &self.model.body;
        let external = disturbance.f + p.mass * p.gravity;
        Wrench::new(-(self.body.rotation().transpose() * external), -disturbance.tau)
    }

    pub fn anchor_loads(&self, disturbance: &Wrench, pretension: f64) -> Result<Stacked> {
        distribute_wrench(&self.maps, &self.required_wrench(disturbance), pretension)
    }
}

/// Minimum factor of safety over the anchored booms for a disturbance.
pub fn factor_of_safety(
    stance: &Stance,
    disturbance: &Wrench,
    pretension: f64,
    structural: &BoomStructuralParams,
    grip: &GripModel,
) -> Result<FosReport> {
    let x = stance.anchor_loads(disturbance, pretension)?;
    let mut report = FosReport {
        value: FOS_SENTINEL,
        boom: None,
        mode: FailureMode::Unloaded,
    };
    let mut consider = |value: f64, boom: usize, mode: FailureMode| {
        if value < report.value {
            report = FosReport {
                value,
                boom: Some(boom),
                mode,
            };
        }
    };
    for i in 0..NUM_BOOMS {
        let Some(anchor) = stance.anchors.anchor_of(i) else {
            continue;
        };
        let xi = Vec2::new(x[2 * i], x[2 * i + 1]);
        let (tension, _) = boom_components(&xi, &stance.maps.axes[i]);
        if tension > 0.0 {
            consider(structural.f_tensile_max / tension, i, FailureMode::Yield);
        } else if tension < 0.0 {
            let c = -tension;
            let buckle = structural.critical_load(stance.joints[i].b);
            if buckle <= structural.f_boom_push_max {
                consider(buckle / c, i, FailureMode::Buckling);
            } else {
                consider(structural.f_boom_push_max / c, i, FailureMode::Push);
            }
        }
        let (f_t, f_n) = local_components(&xi, &anchor.normal);
        consider(grip_factor(f_t, f_n, grip), i, FailureMode::Grip);
    }
    report.value = report.value.min(FOS_SENTINEL);
    Ok(report)
}

/// Factor-of-safety values over a rectangular grid of wall-frame
/// disturbance forces. Row `r` holds `F_y = fy[r]`, column `c` holds
/// `F_x = fx[c]`; `values` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FosGrid {
    pub fx: Vec<f64>,
    pub fy: Vec<f64>,
    pub pretension: f64,
    pub values: Vec<f64>,
}

impl FosGrid {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.fx.len() + col]
    }

    /// Number of cells whose factor of safety is at least 1.
    pub fn safe_cells(&self) -> usize {
        self.values.iter().filter(|&&v| v >= 1.0).count()
    }
}

/// Evenly spaced samples covering `[-range, range]` inclusive.
pub fn symmetric_axis(range: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -range + 2.0 * range * k as f64 / (n - 1) as f64)
        .collect()
}

pub fn fos_grid(
    stance: &Stance,
    fx: Vec<f64>,
    fy: Vec<f64>,
    pretension: f64,
    structural: &BoomStructuralParams,
    grip: &GripModel,
) -> Result<FosGrid> {
    if fx.len() < 2 || fy.len() < 2 {
        return Err(Error::invalid("grid", "need at least 2 samples per axis"));
    }
    let values = fy
        .par_iter()
        .map(|&y| {
            fx.iter()
                .map(|&x| {
                    let d = Wrench::new(Vec2::new(x, y), 0.0);
                    factor_of_safety(stance, &d, pretension, structural, grip).map(|r| r.value)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    Ok(FosGrid {
        fx,
        fy,
        pretension,
        values,
    })
}

/// Additive zero-mean Gaussian actuator noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation in actuator units (N for the prismatic joints,
    /// N·m for the revolute joints).
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { sigma: 0.0, seed: 0 }
    }
}

/// Seeded noise source, one independent draw per joint per step.
#[derive(Debug, Clone)]
pub struct ProcessNoise {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl ProcessNoise {
    pub fn new(spec: &NoiseSpec) -> Result<Self> {
        if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
            return Err(Error::invalid("noise.sigma", "must be non-negative"));
        }
        let normal = (spec.sigma > 0.0)
            .then(|| Normal::new(0.0, spec.sigma).expect("sigma checked above"));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            normal,
        })
    }

    pub fn perturb(&mut self, cmd: &JointCommand) -> JointCommand {
        let Some(normal) = &self.normal else {
            return *cmd;
        };
        let mut out = *cmd;
        for i in 0..NUM_BOOMS {
            out.f_b[i] += normal.sample(&mut self.rng);
            out.tau_theta[i] += normal.sample(&mut self.rng);
        }
        out
    }
}

/// Plant parameters with scaled mass and inertia. The controller keeps the
/// unscaled values.
pub fn model_error(params: &BodyParams, mass_scale: f64, inertia_scale: f64) -> BodyParams {
    BodyParams {
        mass: params.mass * mass_scale,
        inertia: params.inertia * inertia_scale,
        gravity: params.gravity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeRow {
    pub mass_kg: f64,
    /// Time to satisfy every waypoint of the template.
    pub response_time_s: f64,
    /// Fraction of steps on which clipping changed the command.
    pub clipped_fraction: f64,
    pub clipped: bool,
}

/// Runs the template once per plant mass. The controller keeps the
/// template's modelled mass; inertia scales with mass. Rows come back in the
/// order of `masses`.
pub fn trade_study(template: &Scenario, masses: &[f64]) -> Result<Vec<TradeRow>> {
    if let Some(m) = masses.iter().find(|m| !(**m > 0.0 && m.is_finite())) {
        return Err(Error::invalid("masses", format!("mass {m} must be positive")));
    }
    let nominal = template.model.body.mass;
    masses
        .par_iter()
        .map(|&mass| {
            let mut s = template.clone();
            s.model_error.mass_scale = mass / nominal;
            s.model_error.inertia_scale = mass / nominal;
            let trace = sim::run(&s).map_err(|e| match e {
                Error::NonConvergent {
                    waypoint, budget_s, ..
                } => Error::NonConvergent {
                    waypoint,
                    budget_s,
                    mass_kg: Some(mass),
                },
                other => other,
            })?;
            let clipped_fraction = trace.saturated_fraction();
            Ok(TradeRow {
                mass_kg: mass,
                response_time_s: trace.final_time(),
                clipped_fraction,
                clipped: clipped_fraction > 0.0,
            })
        })
        .collect()
}
