//! Boom geometry for the four-boom parallel mechanism.
//!
//! Joint coordinates of boom `i` are its length `b` and its angle `theta`,
//! measured from the body x-axis, so the boom's wall-frame bearing is
//! `phi + theta`. The tip sits at
//!
//! ```text
//! tip_i = p + R(phi)·s_i + b_i·u(phi + theta_i)
//! ```
//!
//! with `s_i` the shoulder offset in the body frame.
//!
//! Contact forces `x_i` are the loads a boom tip places on its anchor, in
//! wall-frame coordinates. A boom in tension pulls its anchor toward the
//! shoulder, so the axial tension is `-u_i · x_i`. With this convention the
//! three maps built here are mutually consistent:
//!
//! * `τ = Jᵀ x`: joint efforts (`f_b` extends the boom, `τ_θ` turns it
//!   counter-clockwise) balancing the anchor loads.
//! * `[f_r; τ_r] = H x`: resultant body wrench, body frame.
//! * `J q̇ = Hᵀ V`: joint rates that keep every attached tip still while the
//!   body moves with twist `V`.
//!
//! so joint power `⟨τ, q̇⟩` equals body power `⟨H x, V⟩` exactly.
//!
//! The boom tip is a pin joint: each contact transmits a planar force and no
//! moment. The block-diagonal `J` is used directly; there is no separate
//! contact-selection matrix in front of it because the planar pin-joint
//! selector is the identity on the two force components.

use nalgebra::{Matrix2, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::frames::{perp, transition_matrix, unit, wrap_angle, PlanarPose, Twist};
use crate::{Error, Result, Stacked, Vec2, NUM_BOOMS};

/// Joint coordinates and rates of one boom.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoomJointState {
    /// Length (m).
    pub b: f64,
    /// Angle relative to the body x-axis (rad).
    pub theta: f64,
    pub b_dot: f64,
    pub theta_dot: f64,
}

impl BoomJointState {
    pub fn new(b: f64, theta: f64) -> Self {
        Self {
            b,
            theta,
            b_dot: 0.0,
            theta_dot: 0.0,
        }
    }

    /// Wall-frame bearing of the boom axis.
    pub fn bearing(&self, body: &PlanarPose) -> f64 {
        body.angle() + self.theta
    }

    /// Unit boom axis (shoulder to tip) in the wall frame.
    pub fn axis(&self, body: &PlanarPose) -> Vec2 {
        unit(self.bearing(body))
    }

    /// Forward placement of the tip in the wall frame.
    pub fn tip_position(&self, body: &PlanarPose, cfg: &BoomConfig) -> Vec2 {
        body.transform_point(&cfg.shoulder_offset) + self.b * self.axis(body)
    }

    /// Tip velocity in the wall frame for a body moving with `twist`
    /// (body-frame twist) while the joints move with their stored rates.
    pub fn tip_velocity(&self, body: &PlanarPose, twist: &Twist, cfg: &BoomConfig) -> Vec2 {
        let lever = self.tip_position(body, cfg) - body.position();
        let body_point = body.rotation() * twist.v + twist.w * perp(&lever);
        body_point + boom_jacobian(self, body) * nalgebra::Vector2::new(self.b_dot, self.theta_dot)
    }
}

/// Static description of one boom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoomConfig {
    /// Shoulder position in the body frame (m).
    pub shoulder_offset: Vec2,
    pub b_min: f64,
    pub b_max: f64,
    /// Gripper / end-effector point mass (kg).
    pub ee_mass: f64,
}

impl BoomConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.b_min >= 0.0 && self.b_min < self.b_max) {
            return Err(format!(
                "extension limits must satisfy 0 <= b_min < b_max (got {} .. {})",
                self.b_min, self.b_max
            ));
        }
        if self.ee_mass.is_nan() || self.ee_mass <= 0.0 {
            return Err(format!("end-effector mass must be positive (got {})", self.ee_mass));
        }
        if !self.shoulder_offset.iter().all(|c| c.is_finite()) {
            return Err("shoulder offset must be finite".into());
        }
        Ok(())
    }
}

/// A wall anchor point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub position: Vec2,
    /// Unit normal pointing into the wall surface at the anchor.
    pub normal: Vec2,
}

impl Anchor {
    pub fn new(position: Vec2, normal: Vec2) -> Self {
        Self {
            position,
            normal: normal.normalize(),
        }
    }
}

/// The anchors in the environment and which boom holds which.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    anchors: Vec<Anchor>,
    attached: [Option<usize>; NUM_BOOMS],
}

impl AnchorSet {
    pub fn new(anchors: Vec<Anchor>, attached: [Option<usize>; NUM_BOOMS]) -> Result<Self> {
        let set = Self {
            anchors,
            attached: [None; NUM_BOOMS],
        };
        set.with_attachments(attached)
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn anchor(&self, index: usize) -> Option<&Anchor> {
        self.anchors.get(index)
    }

    pub fn attached(&self) -> [Option<usize>; NUM_BOOMS] {
        self.attached
    }

    pub fn is_attached(&self, boom: usize) -> bool {
        self.attached[boom].is_some()
    }

    /// Anchor currently held by `boom`.
    pub fn anchor_of(&self, boom: usize) -> Option<&Anchor> {
        self.attached[boom].map(|k| &self.anchors[k])
    }

    /// Returns a copy with a new attachment assignment, checking that indices
    /// are in range and that no anchor is shared.
    pub fn with_attachments(&self, attached: [Option<usize>; NUM_BOOMS]) -> Result<Self> {
        for (boom, slot) in attached.iter().enumerate() {
            let Some(k) = *slot else { continue };
            if k >= self.anchors.len() {
                return Err(Error::invalid(
                    format!("booms[{boom}].anchor"),
                    format!("anchor index {k} out of range ({} anchors)", self.anchors.len()),
                ));
            }
            if attached[..boom].contains(&Some(k)) {
                return Err(Error::invalid(
                    format!("booms[{boom}].anchor"),
                    format!("anchor {k} already held by another boom"),
                ));
            }
        }
        Ok(Self {
            anchors: self.anchors.clone(),
            attached,
        })
    }
}

/// Joint coordinates of a single boom reaching `target` from `body`.
pub fn boom_inverse_kinematics(
    boom: usize,
    body: &PlanarPose,
    cfg: &BoomConfig,
    target: &Vec2,
) -> Result<BoomJointState> {
    let shoulder = body.transform_point(&cfg.shoulder_offset);
    let d = target - shoulder;
    let b = d.norm();
    if b <= f64::EPSILON * (1.0 + shoulder.norm()) {
        return Err(Error::AnchorCoincident { boom });
    }
    if b < cfg.b_min || b > cfg.b_max {
        return Err(Error::ExtensionOutOfRange {
            boom,
            length: b,
            min: cfg.b_min,
            max: cfg.b_max,
        });
    }
    let theta = wrap_angle(d.y.atan2(d.x) - body.angle());
    Ok(BoomJointState::new(b, theta))
}

/// Joint coordinates of every attached boom for a body pose. Detached booms
/// yield `None`. Rates are zero; see [`joint_rates_from_body_twist`].
pub fn inverse_kinematics(
    body: &PlanarPose,
    cfg: &[BoomConfig; NUM_BOOMS],
    anchors: &AnchorSet,
) -> Result<[Option<BoomJointState>; NUM_BOOMS]> {
    let mut out = [None; NUM_BOOMS];
    for (i, slot) in out.iter_mut().enumerate() {
        if let Some(anchor) = anchors.anchor_of(i) {
            *slot = Some(boom_inverse_kinematics(i, body, &cfg[i], &anchor.position)?);
        }
    }
    Ok(out)
}

/// Maps `[ḃ; θ̇]` to the tip velocity relative to the shoulder, in the wall
/// frame, with the body orientation held fixed. Columns are the boom axis and
/// `b` times the axis rotated by +pi/2.
pub fn boom_jacobian(q: &BoomJointState, body: &PlanarPose) -> Matrix2<f64> {
    let u = q.axis(body);
    let n = q.b * perp(&u);
    Matrix2::new(u.x, n.x, u.y, n.y)
}

/// Grasp map `H` (contact loads to body wrench, body frame) and the
/// block-diagonal boom Jacobian `J` (wall frame) for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMaps {
    pub h: SMatrix<f64, 3, 8>,
    pub j: SMatrix<f64, 8, 8>,
    /// Unit boom axes in the wall frame.
    pub axes: [Vec2; NUM_BOOMS],
    pub attached: [bool; NUM_BOOMS],
}

/// Relative tolerance on singular values when deciding the rank of `H`.
pub const RANK_TOLERANCE: f64 = 1e-9;

impl GraspMaps {
    pub fn jacobian_block(&self, boom: usize) -> Matrix2<f64> {
        self.j.fixed_view::<2, 2>(2 * boom, 2 * boom).into_owned()
    }

    pub fn h_block(&self, boom: usize) -> SMatrix<f64, 3, 2> {
        self.h.fixed_view::<3, 2>(0, 2 * boom).into_owned()
    }

    /// Numerical rank of `H` with singular values below
    /// `RANK_TOLERANCE * sigma_max` treated as zero.
    pub fn rank(&self) -> usize {
        let sv = self.h.singular_values();
        let max = sv.max();
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > RANK_TOLERANCE * max).count()
    }

    pub fn ensure_full_rank(&self) -> Result<()> {
        match self.rank() {
            3 => Ok(()),
            rank => Err(Error::RankDeficient { rank }),
        }
    }

    /// Axial tension of each boom (positive when pulling the anchor toward the
    /// shoulder) for stacked anchor loads `x`.
    pub fn tensions(&self, x: &Stacked) -> [f64; NUM_BOOMS] {
        std::array::from_fn(|i| -self.axes[i].dot(&x.fixed_rows::<2>(2 * i)))
    }

    /// 4×8 map from stacked anchor loads to axial tensions; zero rows for
    /// detached booms.
    pub fn tension_map(&self) -> SMatrix<f64, 4, 8> {
        let mut a = SMatrix::<f64, 4, 8>::zeros();
        for i in 0..NUM_BOOMS {
            if self.attached[i] {
                a[(i, 2 * i)] = -self.axes[i].x;
                a[(i, 2 * i + 1)] = -self.axes[i].y;
            }
        }
        a
    }
}

/// Builds `H` and `J` for the current body pose and joint coordinates.
///
/// Column block `i` of `H` is the body wrench produced by an anchor load on
/// contact `i`: the body feels the reaction `-x_i` through the contact point,
/// transformed to the body frame with [`transition_matrix`]. Detached booms
/// contribute zero columns (their `J` block is still filled in).
pub fn grasp_maps(
    body: &PlanarPose,
    joints: &[BoomJointState; NUM_BOOMS],
    cfg: &[BoomConfig; NUM_BOOMS],
    anchors: &AnchorSet,
) -> Result<GraspMaps> {
    let mut h = SMatrix::<f64, 3, 8>::zeros();
    let mut j = SMatrix::<f64, 8, 8>::zeros();
    let mut axes = [Vec2::zeros(); NUM_BOOMS];
    let mut attached = [false; NUM_BOOMS];
    // Pin-joint selector: planar force components, no moment.
    let selector = SMatrix::<f64, 3, 2>::new(1.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    for i in 0..NUM_BOOMS {
        let q = &joints[i];
        axes[i] = q.axis(body);
        j.fixed_view_mut::<2, 2>(2 * i, 2 * i)
            .copy_from(&boom_jacobian(q, body));
        if !anchors.is_attached(i) {
            continue;
        }
        if q.b <= 0.0 {
            return Err(Error::SingularBoom { boom: Some(i) });
        }
        attached[i] = true;
        let contact = q.tip_position(body, &cfg[i]);
        // Contact frame C_wi: at the tip, axes parallel to the wall frame.
        let rel = PlanarPose::new(
            body.rotation().transpose() * (contact - body.position()),
            -body.angle(),
        );
        let block = -(transition_matrix(&rel).transpose() * selector);
        h.fixed_view_mut::<3, 2>(0, 2 * i).copy_from(&block);
    }
    Ok(GraspMaps {
        h,
        j,
        axes,
        attached,
    })
}

/// Joint rates that keep every attached tip fixed in the wall frame while the
/// body moves with `twist`: `J_i q̇_i = H_iᵀ V` per boom. Detached booms get
/// zero rates.
pub fn joint_rates_from_body_twist(maps: &GraspMaps, twist: &Twist) -> Result<Stacked> {
    let v: Vector3<f64> = twist.to_vector();
    let mut qdot = SVector::<f64, 8>::zeros();
    for i in 0..NUM_BOOMS {
        if !maps.attached[i] {
            continue;
        }
        let rhs = maps.h_block(i).transpose() * v;
        let block = maps.jacobian_block(i);
        let sol = block
            .lu()
            .solve(&rhs)
            .filter(|s| s.iter().all(|c| c.is_finite()))
            .ok_or(Error::SingularBoom { boom: Some(i) })?;
        qdot.fixed_rows_mut::<2>(2 * i).copy_from(&sol);
    }
    Ok(qdot)
}

/// Attached-boom joint states with rates, for a body pose and twist.
pub fn slaved_joints(
    body: &PlanarPose,
    twist: &Twist,
    cfg: &[BoomConfig; NUM_BOOMS],
    anchors: &AnchorSet,
    previous: &[BoomJointState; NUM_BOOMS],
) -> Result<[BoomJointState; NUM_BOOMS]> {
    let ik = inverse_kinematics(body, cfg, anchors)?;
    let mut joints = *previous;
    for i in 0..NUM_BOOMS {
        if let Some(q) = ik[i] {
            joints[i] = q;
        }
    }
    let maps = grasp_maps(body, &joints, cfg, anchors)?;
    let qdot = joint_rates_from_body_twist(&maps, twist)?;
    for i in 0..NUM_BOOMS {
        if ik[i].is_some() {
            joints[i].b_dot = qdot[2 * i];
            joints[i].theta_dot = qdot[2 * i + 1];
        }
    }
    Ok(joints)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn cfg(shoulder: Vec2) -> BoomConfig {
        BoomConfig {
            shoulder_offset: shoulder,
            b_min: 0.0,
            b_max: 10.0,
            ee_mass: 1.0,
        }
    }

    fn square(l: f64, s: f64) -> ([BoomConfig; 4], AnchorSet) {
        let signs = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        let cfgs = signs.map(|(x, y)| cfg(Vec2::new(x * s, y * s)));
        let anchors = signs
            .iter()
            .map(|&(x, y)| Anchor::new(Vec2::new(x * l, y * l), Vec2::new(0.0, y)))
            .collect();
        (cfgs, AnchorSet::new(anchors, [Some(0), Some(1), Some(2), Some(3)]).unwrap())
    }

    #[test]
    fn vertical_boom_ik() {
        let c = cfg(Vec2::new(0.15, 0.10));
        let q = boom_inverse_kinematics(0, &PlanarPose::identity(), &c, &Vec2::new(0.15, 2.10)).unwrap();
        assert_relative_eq!(q.b, 2.0, epsilon = 1e-12);
        assert_relative_eq!(q.theta, PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_anchor_rejected() {
        let c = cfg(Vec2::new(0.15, 0.10));
        let body = PlanarPose::new(Vec2::new(1.0, 2.0), 0.3);
        let shoulder = body.transform_point(&c.shoulder_offset);
        assert_eq!(
            boom_inverse_kinematics(2, &body, &c, &shoulder),
            Err(Error::AnchorCoincident { boom: 2 })
        );
    }

    #[test]
    fn extension_limits_enforced() {
        let mut c = cfg(Vec2::zeros());
        c.b_min = 0.5;
        c.b_max = 5.0;
        let body = PlanarPose::identity();
        assert!(matches!(
            boom_inverse_kinematics(1, &body, &c, &Vec2::new(6.0, 0.0)),
            Err(Error::ExtensionOutOfRange { boom: 1, .. })
        ));
        assert!(matches!(
            boom_inverse_kinematics(1, &body, &c, &Vec2::new(0.2, 0.0)),
            Err(Error::ExtensionOutOfRange { boom: 1, .. })
        ));
    }

    #[test]
    fn boom_jacobian_examples() {
        let body = PlanarPose::identity();
        assert_relative_eq!(boom_jacobian(&BoomJointState::new(1.0, 0.0), &body), Matrix2::identity());
        let j = boom_jacobian(&BoomJointState::new(2.0, PI / 2.0), &body);
        assert_relative_eq!(j, Matrix2::new(0.0, -2.0, 1.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn zero_length_boom_has_rank_one_jacobian() {
        let j = boom_jacobian(&BoomJointState::new(0.0, 0.4), &PlanarPose::identity());
        assert_relative_eq!(j.determinant(), 0.0);
        assert!(j.column(0).norm() > 0.5);
    }

    #[test]
    fn symmetric_uniform_tension_is_internal() {
        let (cfgs, anchors) = square(3.0, 0.2);
        let body = PlanarPose::identity();
        let joints = inverse_kinematics(&body, &cfgs, &anchors).unwrap().map(Option::unwrap);
        let maps = grasp_maps(&body, &joints, &cfgs, &anchors).unwrap();
        let mut x = Stacked::zeros();
        for i in 0..4 {
            // tension: each boom pulls its anchor back toward the shoulder
            x.fixed_rows_mut::<2>(2 * i).copy_from(&(-maps.axes[i]));
        }
        assert!((maps.h * x).norm() < 1e-14);
        for t in maps.tensions(&x) {
            assert_relative_eq!(t, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_contact_wrench() {
        let c = [cfg(Vec2::zeros()); 4];
        let anchors = AnchorSet::new(
            vec![Anchor::new(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0))],
            [Some(0), None, None, None],
        )
        .unwrap();
        let body = PlanarPose::identity();
        let mut joints = [BoomJointState::new(1.0, 0.0); 4];
        joints[0] = boom_inverse_kinematics(0, &body, &c[0], &Vec2::new(1.0, 0.0)).unwrap();
        let maps = grasp_maps(&body, &joints, &c, &anchors).unwrap();
        // A unit force (0, 1) on the body through the contact at (1, 0) is the
        // reaction to an anchor load of (0, -1).
        let mut x = Stacked::zeros();
        x[1] = -1.0;
        let w = maps.h * x;
        assert_relative_eq!(w, Vector3::new(0.0, 1.0, 1.0), epsilon = 1e-15);
        assert_eq!(maps.rank(), 2);
    }

    #[test]
    fn zero_twist_zero_rates() {
        let (cfgs, anchors) = square(3.0, 0.2);
        let body = PlanarPose::new(Vec2::new(0.2, -0.1), 0.1);
        let joints = inverse_kinematics(&body, &cfgs, &anchors).unwrap().map(Option::unwrap);
        let maps = grasp_maps(&body, &joints, &cfgs, &anchors).unwrap();
        assert_eq!(joint_rates_from_body_twist(&maps, &Twist::zero()).unwrap(), Stacked::zeros());
    }

    #[test]
    fn axial_translation_shortens_boom() {
        let c = [cfg(Vec2::new(0.15, 0.0)); 4];
        let anchors = AnchorSet::new(
            vec![Anchor::new(Vec2::new(3.0, 0.0), Vec2::new(1.0, 0.0))],
            [Some(0), None, None, None],
        )
        .unwrap();
        let body = PlanarPose::identity();
        let joints = [boom_inverse_kinematics(0, &body, &c[0], &Vec2::new(3.0, 0.0)).unwrap(); 4];
        let maps = grasp_maps(&body, &joints, &c, &anchors).unwrap();
        let qdot = joint_rates_from_body_twist(&maps, &Twist::new(Vec2::new(0.3, 0.0), 0.0)).unwrap();
        assert_relative_eq!(qdot[0], -0.3, epsilon = 1e-15);
        assert_relative_eq!(qdot[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_boom_reported() {
        let (cfgs, anchors) = square(3.0, 0.2);
        let body = PlanarPose::identity();
        let mut joints = inverse_kinematics(&body, &cfgs, &anchors).unwrap().map(Option::unwrap);
        joints[3].b = 0.0;
        assert_eq!(
            grasp_maps(&body, &joints, &cfgs, &anchors),
            Err(Error::SingularBoom { boom: Some(3) })
        );
    }

    #[test]
    fn shared_anchor_rejected() {
        let anchors = vec![Anchor::new(Vec2::new(1.0, 0.0), Vec2::x()); 2];
        assert!(AnchorSet::new(anchors.clone(), [Some(0), Some(0), None, None]).is_err());
        assert!(AnchorSet::new(anchors, [Some(0), Some(2), None, None]).is_err());
    }
}
