//! Scenario files.
//!
//! Scenarios are TOML. Physical quantities carry their unit in the key name.
//! Unknown keys are rejected. See `scenarios/reference_hallway.toml` for a
//! complete example.

use serde::{Deserialize, Serialize};

use crate::analysis::{BoomStructuralParams, GripModel, NoiseSpec};
use crate::control::{ActuatorLimits, BodyGains, EndEffectorGains};
use crate::dynamics::{BodyParams, RobotModel};
use crate::frames::PlanarPose;
use crate::gait::{GaitProgram, Thresholds, Waypoint};
use crate::kinematics::{Anchor, AnchorSet, BoomConfig};
use crate::{Error, Result, Vec2, NUM_BOOMS};

/// Plant-side scaling of the body mass and inertia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelError {
    pub mass_scale: f64,
    pub inertia_scale: f64,
}

impl Default for ModelError {
    fn default() -> Self {
        Self {
            mass_scale: 1.0,
            inertia_scale: 1.0,
        }
    }
}

/// Actuator noise level: either absolute, or relative to the median
/// magnitude of the noise-free run's applied commands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    Absolute(f64),
    FractionOfMedian(f64),
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// The controller's model. The plant differs from it by `model_error`.
    pub model: RobotModel,
    pub anchors: AnchorSet,
    pub initial_pose: PlanarPose,
    pub program: GaitProgram,
    pub body_gains: BodyGains,
    pub end_effector_gains: EndEffectorGains,
    pub limits: ActuatorLimits,
    pub dt: f64,
    pub budget: f64,
    pub noise: NoiseLevel,
    pub seed: u64,
    pub model_error: ModelError,
    pub pretension: f64,
    pub structure: BoomStructuralParams,
    pub grip: GripModel,
    pub footprint: [f64; 2],
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::invalid("<document>", e.message().to_string()))?;
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::invalid(path, e.into_inner().message().to_string())
        })?;
        file.validate()
    }

    /// Plant parameters: the modelled ones with the model error applied.
    pub fn plant_model(&self) -> RobotModel {
        let mut m = self.model;
        m.body = crate::analysis::model_error(
            &self.model.body,
            self.model_error.mass_scale,
            self.model_error.inertia_scale,
        );
        m
    }

    pub fn noise_spec(&self, sigma: f64) -> NoiseSpec {
        NoiseSpec {
            sigma,
            seed: self.seed,
        }
    }

    /// The absolute noise level, if given as one.
    pub fn absolute_sigma(&self) -> Option<f64> {
        match self.noise {
            NoiseLevel::Absolute(s) => Some(s),
            NoiseLevel::FractionOfMedian(_) => None,
        }
    }

    pub fn max_steps(&self) -> usize {
        (self.budget / self.dt).ceil() as usize
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: String,
    #[serde(default)]
    seed: u64,
    dt_s: f64,
    duration_budget_s: f64,
    #[serde(default)]
    pretension_n: f64,
    body: BodyFile,
    booms: Vec<BoomFile>,
    anchors: Vec<AnchorFile>,
    #[serde(default)]
    gains: GainsFile,
    #[serde(default)]
    limits: LimitsFile,
    #[serde(default)]
    thresholds: Thresholds,
    #[serde(default)]
    noise: NoiseFile,
    #[serde(default)]
    model_error: ModelError,
    #[serde(default)]
    structure: BoomStructuralParams,
    #[serde(default)]
    grip: GripModel,
    waypoints: Vec<Waypoint>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BodyFile {
    #[serde(default = "default_footprint")]
    footprint_m: [f64; 2],
    mass_kg: f64,
    inertia_kg_m2: Option<f64>,
    #[serde(default)]
    gravity_m_per_s2: [f64; 2],
    #[serde(default)]
    initial_position_m: [f64; 2],
    #[serde(default)]
    initial_angle_rad: f64,
}

fn default_footprint() -> [f64; 2] {
    [0.30, 0.20]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoomFile {
    shoulder_m: [f64; 2],
    #[serde(default = "default_min_length")]
    min_length_m: f64,
    #[serde(default = "default_max_length")]
    max_length_m: f64,
    #[serde(default = "default_ee_mass")]
    end_effector_mass_kg: f64,
    anchor: usize,
}

fn default_min_length() -> f64 {
    0.05
}
fn default_max_length() -> f64 {
    5.0
}
fn default_ee_mass() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorFile {
    position_m: [f64; 2],
    /// Direction into the wall.
    normal: [f64; 2],
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GainsFile {
    body: GainPair<3>,
    end_effector: GainPair<2>,
}

impl Default for GainsFile {
    fn default() -> Self {
        Self {
            body: GainPair {
                kp: DEFAULT_BODY_KP,
                kd: DEFAULT_BODY_KD,
            },
            end_effector: GainPair {
                kp: DEFAULT_EE_KP,
                kd: DEFAULT_EE_KD,
            },
        }
    }
}

/// Diagonal body gains for `(x, y, φ)`.
pub const DEFAULT_BODY_KP: [f64; 3] = [0.5, 0.5, 0.5];
pub const DEFAULT_BODY_KD: [f64; 3] = [1.1, 1.1, 1.1];
/// Diagonal end-effector gains for `(b, θ)`.
pub const DEFAULT_EE_KP: [f64; 2] = [5.0, 2.5];
pub const DEFAULT_EE_KD: [f64; 2] = [4.5, 10.0];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainPair<const N: usize> {
    #[serde(with = "serde_arrays")]
    kp: [f64; N],
    #[serde(with = "serde_arrays")]
    kd: [f64; N],
}

mod serde_arrays {
    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, D: Deserializer<'de>, const N: usize>(
        d: D,
    ) -> Result<[f64; N], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let len = v.len();
        v.try_into().map_err(|_| {
            serde::de::Error::invalid_length(len, &format!("{N} diagonal entries").as_str())
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct LimitsFile {
    prismatic_n: f64,
    revolute_n_m: f64,
}

impl Default for LimitsFile {
    fn default() -> Self {
        Self {
            prismatic_n: 5.0,
            revolute_n_m: 2.5,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct NoiseFile {
    sigma: Option<f64>,
    sigma_fraction_of_median: Option<f64>,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite(field: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be finite"))
    }
}

fn gains_error(field: &str, e: Error) -> Error {
    match e {
        Error::GainNotPD {
            which,
            min_eigenvalue,
        } => Error::invalid(
            format!("{field}.{}", if which == "proportional" { "kp" } else { "kd" }),
            format!("gain matrix not positive definite (min eigenvalue {min_eigenvalue})"),
        ),
        other => other,
    }
}

impl ScenarioFile {
    fn validate(self) -> Result<Scenario> {
        positive("dt_s", self.dt_s)?;
        positive("duration_budget_s", self.duration_budget_s)?;
        if !(self.pretension_n >= 0.0 && self.pretension_n.is_finite()) {
            return Err(Error::invalid("pretension_n", "must be non-negative"));
        }

        let b = &self.body;
        positive("body.mass_kg", b.mass_kg)?;
        positive("body.footprint_m[0]", b.footprint_m[0])?;
        positive("body.footprint_m[1]", b.footprint_m[1])?;
        finite("body.gravity_m_per_s2", &b.gravity_m_per_s2)?;
        finite("body.initial_position_m", &b.initial_position_m)?;
        finite("body.initial_angle_rad", &[b.initial_angle_rad])?;
        let inertia = match b.inertia_kg_m2 {
            Some(i) => {
                positive("body.inertia_kg_m2", i)?;
                i
            }
            None => BodyParams::plate_inertia(b.mass_kg, b.footprint_m[0], b.footprint_m[1]),
        };
        let body = BodyParams {
            mass: b.mass_kg,
            inertia,
            gravity: Vec2::from(b.gravity_m_per_s2),
        };

        if self.booms.len() != NUM_BOOMS {
            return Err(Error::invalid(
                "booms",
                format!("expected {NUM_BOOMS} booms, got {}", self.booms.len()),
            ));
        }
        let mut booms = [BoomConfig {
            shoulder_offset: Vec2::zeros(),
            b_min: 0.0,
            b_max: 0.0,
            ee_mass: 0.0,
        }; NUM_BOOMS];
        let mut attached = [None; NUM_BOOMS];
        for (i, f) in self.booms.iter().enumerate() {
            finite(&format!("booms[{i}].shoulder_m"), &f.shoulder_m)?;
            let cfg = BoomConfig {
                shoulder_offset: Vec2::from(f.shoulder_m),
                b_min: f.min_length_m,
                b_max: f.max_length_m,
                ee_mass: f.end_effector_mass_kg,
            };
            cfg.validate()
                .map_err(|r| Error::invalid(format!("booms[{i}]"), r))?;
            booms[i] = cfg;
            attached[i] = Some(f.anchor);
        }

        let mut anchors = Vec::with_capacity(self.anchors.len());
        for (k, a) in self.anchors.iter().enumerate() {
            finite(&format!("anchors[{k}].position_m"), &a.position_m)?;
            let n = Vec2::from(a.normal);
            if !(n.norm() > 0.0 && n.norm().is_finite()) {
                return Err(Error::invalid(
                    format!("anchors[{k}].normal"),
                    "must be a nonzero direction",
                ));
            }
            anchors.push(Anchor::new(Vec2::from(a.position_m), n));
        }
        let anchors = AnchorSet::new(anchors, attached)?;
        let model = RobotModel { body, booms };

        let body_gains = BodyGains::diagonal(self.gains.body.kp, self.gains.body.kd)
            .map_err(|e| gains_error("gains.body", e))?;
        let end_effector_gains =
            EndEffectorGains::diagonal(self.gains.end_effector.kp, self.gains.end_effector.kd)
                .map_err(|e| gains_error("gains.end_effector", e))?;

        let limits = ActuatorLimits {
            f_b_max: self.limits.prismatic_n,
            tau_theta_max: self.limits.revolute_n_m,
        };
        positive("limits.prismatic_n", limits.f_b_max)?;
        positive("limits.revolute_n_m", limits.tau_theta_max)?;

        let noise = match (self.noise.sigma, self.noise.sigma_fraction_of_median) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "noise",
                    "give either sigma or sigma_fraction_of_median, not both",
                ))
            }
            (Some(s), None) => NoiseLevel::Absolute(s),
            (None, Some(f)) => NoiseLevel::FractionOfMedian(f),
            (None, None) => NoiseLevel::Absolute(0.0),
        };
        match noise {
            NoiseLevel::Absolute(s) | NoiseLevel::FractionOfMedian(s)
                if !(s >= 0.0 && s.is_finite()) =>
            {
                return Err(Error::invalid("noise", "level must be non-negative"));
            }
            _ => {}
        }
        positive("model_error.mass_scale", self.model_error.mass_scale)?;
        positive("model_error.inertia_scale", self.model_error.inertia_scale)?;
        self.structure
            .validate()
            .map_err(|r| Error::invalid("structure", r))?;
        self.grip.validate().map_err(|r| Error::invalid("grip", r))?;

        let program = GaitProgram::new(self.waypoints, self.thresholds, &anchors)?;
        let initial_pose = PlanarPose::new(Vec2::from(b.initial_position_m), b.initial_angle_rad);

        Ok(Scenario {
            name: self.name,
            model,
            anchors,
            initial_pose,
            program,
            body_gains,
            end_effector_gains,
            limits,
            dt: self.dt_s,
            budget: self.duration_budget_s,
            noise,
            seed: self.seed,
            model_error: self.model_error,
            pretension: self.pretension_n,
            structure: self.structure,
            grip: self.grip,
            footprint: b.footprint_m,
        })
    }
}
