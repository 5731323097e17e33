//! 8-DOF robot: two prismatic gantry axes carrying a 6-revolute-joint arm
//! with a disc paddle on the final link.
//!
//! The chain is a list of fixed translations interleaved with single-axis
//! joint motions. Collision handling is a proxy: capsules between arm frame
//! origins tested against the table slab and against non-adjacent capsules.

use nalgebra::{Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::ball::PhysicsParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Prismatic,
    Revolute,
}

/// One joint: a fixed translation from the previous frame, then motion along
/// or about `axis` (expressed in the local frame).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    pub kind: JointKind,
    pub axis: [f64; 3],
    /// Fixed translation from the parent frame, meters.
    pub origin: [f64; 3],
    /// Position limits: radians (revolute) or meters (prismatic).
    pub limits: [f64; 2],
    /// Speed limit: rad/s or m/s.
    pub velocity_limit: f64,
}

impl Joint {
    fn new(kind: JointKind, axis: [f64; 3], origin: [f64; 3], limits: [f64; 2], vel: f64) -> Self {
        Joint {
            kind,
            axis,
            origin,
            limits,
            velocity_limit: vel,
        }
    }
}

pub const DOF: usize = 8;

/// Paddle pose produced by forward kinematics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaddlePose {
    pub center: Vector3<f64>,
    pub normal: Unit<Vector3<f64>>,
    pub velocity: Vector3<f64>,
}

/// Robot description. All geometry is configurable; the default approximates
/// a small 6-DOF arm mounted on a two-axis gantry behind the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotModel {
    /// World position of the gantry root.
    pub base: [f64; 3],
    pub joints: Vec<Joint>,
    /// Paddle center offset from the final joint frame.
    pub paddle_offset: [f64; 3],
    /// Paddle disc normal in the final frame.
    pub paddle_normal_axis: [f64; 3],
    /// Capsule radius used by the collision proxies.
    pub link_radius: f64,
    /// Reference poses; also the reset poses.
    pub forehand_pose: [f64; DOF],
    pub center_pose: [f64; DOF],
    pub backhand_pose: [f64; DOF],
}

impl Default for RobotModel {
    fn default() -> Self {
        let joints = vec![
            // Gantry: across the table, then toward it.
            Joint::new(JointKind::Prismatic, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-1.0, 1.0], 2.0),
            Joint::new(JointKind::Prismatic, [0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.9], 2.0),
            // Arm: yaw, shoulder, elbow, forearm roll, wrist pitch, wrist roll.
            Joint::new(JointKind::Revolute, [0.0, 0.0, 1.0], [0.0, 0.0, 0.29], [-2.87, 2.87], 4.36),
            Joint::new(JointKind::Revolute, [1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-1.91, 1.91], 4.36),
            Joint::new(JointKind::Revolute, [1.0, 0.0, 0.0], [0.0, 0.0, 0.27], [-1.92, 1.22], 4.36),
            Joint::new(JointKind::Revolute, [0.0, 0.0, 1.0], [0.0, 0.0, 0.07], [-2.79, 2.79], 5.58),
            Joint::new(JointKind::Revolute, [1.0, 0.0, 0.0], [0.0, 0.0, 0.302], [-2.09, 2.09], 5.58),
            Joint::new(
                JointKind::Revolute,
                [0.0, 0.0, 1.0],
                [0.0, 0.0, 0.072],
                [-std::f64::consts::PI, std::f64::consts::PI],
                7.33,
            ),
        ];
        RobotModel {
            base: [0.0, -2.05, -0.10],
            joints,
            paddle_offset: [0.0, 0.0, 0.10],
            paddle_normal_axis: [0.0, 1.0, 0.0],
            link_radius: 0.045,
            // Stances tuned so the paddle hovers over the strike corridor
            // behind the table end, blade facing the opponent side and
            // tilted up. The backhand is the mirror of the forehand (x
            // prismatic, yaw, and roll joints negated).
            forehand_pose: [0.00, 0.30, -0.50, -1.56, 0.47, 0.70, 1.60, 0.00],
            center_pose: [0.00, 0.30, 0.00, -1.60, 0.65, 0.00, 1.75, 0.00],
            backhand_pose: [0.00, 0.30, 0.50, -1.56, 0.47, -0.70, 1.60, 0.00],
        }
    }
}

impl RobotModel {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.len() != DOF {
            return Err(Error::Config(format!(
                "robot must have {DOF} joints, got {}",
                self.joints.len()
            )));
        }
        let prismatic = self
            .joints
            .iter()
            .filter(|j| j.kind == JointKind::Prismatic)
            .count();
        if prismatic != 2 {
            return Err(Error::Config(format!(
                "robot must have 2 prismatic joints, got {prismatic}"
            )));
        }
        for (i, joint) in self.joints.iter().enumerate() {
            if joint.limits[0] >= joint.limits[1] {
                return Err(Error::Config(format!(
                    "joint {i} limits must satisfy lo < hi, got {:?}",
                    joint.limits
                )));
            }
            if joint.velocity_limit <= 0.0 {
                return Err(Error::Config(format!("joint {i} velocity limit must be positive")));
            }
            let norm = Vector3::from(joint.axis).norm();
            if !(norm.is_finite() && norm > 1e-9) {
                return Err(Error::Config(format!("joint {i} axis must be nonzero")));
            }
        }
        for pose in [&self.forehand_pose, &self.center_pose, &self.backhand_pose] {
            for (i, (&q, joint)) in pose.iter().zip(&self.joints).enumerate() {
                if q < joint.limits[0] || q > joint.limits[1] {
                    return Err(Error::Config(format!(
                        "reference pose violates joint {i} limits: {q} not in {:?}",
                        joint.limits
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn velocity_limits(&self) -> [f64; DOF] {
        let mut out = [0.0; DOF];
        for (o, j) in out.iter_mut().zip(&self.joints) {
            *o = j.velocity_limit;
        }
        out
    }

    pub fn clamp_position(&self, index: usize, q: f64) -> f64 {
        let lim = self.joints[index].limits;
        q.clamp(lim[0], lim[1])
    }

    pub fn reference_pose(&self, pose: super::env::InitPose) -> [f64; DOF] {
        match pose {
            super::env::InitPose::Forehand => self.forehand_pose,
            super::env::InitPose::Center => self.center_pose,
        }
    }

    /// Precomputes unit axes and fixed transforms for the hot FK path.
    pub fn chain(&self) -> KinematicChain {
        KinematicChain {
            base: Translation3::new(self.base[0], self.base[1], self.base[2]).into(),
            joints: self
                .joints
                .iter()
                .map(|j| CompiledJoint {
                    kind: j.kind,
                    axis: Unit::new_normalize(Vector3::from(j.axis)),
                    origin: Vector3::from(j.origin),
                })
                .collect(),
            paddle_offset: Vector3::from(self.paddle_offset),
            paddle_normal: Unit::new_normalize(Vector3::from(self.paddle_normal_axis)),
            link_radius: self.link_radius,
        }
    }

    /// Paddle pose with velocity from finite-differencing the pose along the
    /// joint velocity direction.
    pub fn forward_kinematics(&self, q: &[f64; DOF], qdot: &[f64; DOF]) -> PaddlePose {
        self.chain().forward_kinematics(q, qdot)
    }
}

struct CompiledJoint {
    kind: JointKind,
    axis: Unit<Vector3<f64>>,
    origin: Vector3<f64>,
}

/// Compiled kinematic chain; cheap to evaluate every control step.
pub struct KinematicChain {
    base: Isometry3<f64>,
    joints: Vec<CompiledJoint>,
    paddle_offset: Vector3<f64>,
    paddle_normal: Unit<Vector3<f64>>,
    link_radius: f64,
}

impl KinematicChain {
    /// Paddle center and unit normal for a joint configuration.
    pub fn paddle_pose(&self, q: &[f64; DOF]) -> (Vector3<f64>, Unit<Vector3<f64>>) {
        let t = self.transform_through(q, self.joints.len());
        let center = t * nalgebra::Point3::from(self.paddle_offset);
        let normal = Unit::new_normalize(t.rotation * self.paddle_normal.into_inner());
        (center.coords, normal)
    }

    pub fn forward_kinematics(&self, q: &[f64; DOF], qdot: &[f64; DOF]) -> PaddlePose {
        let (center, normal) = self.paddle_pose(q);
        let h = 1e-6;
        let mut q_ahead = *q;
        for (qa, qd) in q_ahead.iter_mut().zip(qdot) {
            *qa += qd * h;
        }
        let (center_ahead, _) = self.paddle_pose(&q_ahead);
        PaddlePose {
            center,
            normal,
            velocity: (center_ahead - center) / h,
        }
    }

    fn transform_through(&self, q: &[f64; DOF], count: usize) -> Isometry3<f64> {
        let mut t = self.base;
        for (joint, &qi) in self.joints.iter().take(count).zip(q.iter()) {
            t *= Isometry3::from(Translation3::from(joint.origin));
            match joint.kind {
                JointKind::Prismatic => {
                    t *= Isometry3::from(Translation3::from(joint.axis.into_inner() * qi));
                }
                JointKind::Revolute => {
                    t *= Isometry3::from_parts(
                        Translation3::identity(),
                        UnitQuaternion::from_axis_angle(&joint.axis, qi),
                    );
                }
            }
        }
        t
    }

    /// World origins of every joint frame plus the paddle center.
    pub fn frame_positions(&self, q: &[f64; DOF]) -> Vec<Vector3<f64>> {
        let mut points = Vec::with_capacity(self.joints.len() + 1);
        let mut t = self.base;
        for (joint, &qi) in self.joints.iter().zip(q.iter()) {
            t *= Isometry3::from(Translation3::from(joint.origin));
            match joint.kind {
                JointKind::Prismatic => {
                    t *= Isometry3::from(Translation3::from(joint.axis.into_inner() * qi));
                }
                JointKind::Revolute => {
                    t *= Isometry3::from_parts(
                        Translation3::identity(),
                        UnitQuaternion::from_axis_angle(&joint.axis, qi),
                    );
                }
            }
            points.push(t.translation.vector);
        }
        let paddle = t * nalgebra::Point3::from(self.paddle_offset);
        points.push(paddle.coords);
        points
    }

    /// Table and self-collision proxy flags for a configuration.
    pub fn collision_flags(&self, q: &[f64; DOF], physics: &PhysicsParams) -> CollisionFlags {
        let points = self.frame_positions(q);
        // Capsules over the arm links only (skip the gantry frames). Short
        // links are merged into their neighbors so that non-adjacent capsules
        // of a straight arm do not touch by construction.
        let min_link = 0.15;
        let arm = &points[2..];
        let mut capsule_points: Vec<Vector3<f64>> = vec![arm[0]];
        for p in &arm[1..arm.len() - 1] {
            if (p - capsule_points.last().unwrap()).norm() >= min_link {
                capsule_points.push(*p);
            }
        }
        let last = arm[arm.len() - 1];
        if (last - capsule_points.last().unwrap()).norm() > 1e-6 {
            capsule_points.push(last);
        }
        let mut segments: Vec<(Vector3<f64>, Vector3<f64>)> = Vec::with_capacity(6);
        for pair in capsule_points.windows(2) {
            segments.push((pair[0], pair[1]));
        }

        let slab_thickness = 0.08;
        let hw = physics.half_width();
        let hl = physics.half_length();
        let mut table = false;
        for (a, b) in &segments {
            for k in 0..=8 {
                let s = k as f64 / 8.0;
                let p = a + (b - a) * s;
                let dx = (p.x.abs() - hw).max(0.0);
                let dy = (p.y.abs() - hl).max(0.0);
                let dz = if p.z > 0.0 {
                    p.z
                } else if p.z < -slab_thickness {
                    -slab_thickness - p.z
                } else {
                    0.0
                };
                if (dx * dx + dy * dy + dz * dz).sqrt() < self.link_radius {
                    table = true;
                    break;
                }
            }
            if table {
                break;
            }
        }

        let mut self_collision = false;
        'outer: for i in 0..segments.len() {
            for j in (i + 2)..segments.len() {
                let d = segment_distance(
                    &segments[i].0,
                    &segments[i].1,
                    &segments[j].0,
                    &segments[j].1,
                );
                if d < 2.0 * self.link_radius {
                    self_collision = true;
                    break 'outer;
                }
            }
        }

        CollisionFlags {
            table,
            self_collision,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollisionFlags {
    pub table: bool,
    pub self_collision: bool,
}

/// Closest distance between two segments (Ericson, Real-Time Collision
/// Detection, 5.1.9).
fn segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);

    let (s, t);
    if a <= 1e-12 && e <= 1e-12 {
        return r.norm();
    }
    if a <= 1e-12 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= 1e-12 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s_val = if denom > 1e-12 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t_val = (b * s_val + f) / e;
            if t_val < 0.0 {
                t_val = 0.0;
                s_val = (-c / a).clamp(0.0, 1.0);
            } else if t_val > 1.0 {
                t_val = 1.0;
                s_val = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s_val;
            t = t_val;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_model_validates() {
        RobotModel::default().validate().unwrap();
    }

    #[test]
    fn zero_pose_matches_frozen_constant() {
        // Golden value computed once from the default transform chain.
        let model = RobotModel::default();
        let pose = model.forward_kinematics(&[0.0; DOF], &[0.0; DOF]);
        assert_relative_eq!(pose.center.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(pose.center.y, -2.05, epsilon = 1e-9);
        assert_relative_eq!(pose.center.z, 1.004, epsilon = 1e-9);
        assert_relative_eq!(pose.normal.x, 0.0, epsilon = 1e-9);
        assert_relative_eq!(pose.normal.y, 1.0, epsilon = 1e-9);
        assert_relative_eq!(pose.normal.z, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_pose_paddle_inside_workspace_box() {
        let model = RobotModel::default();
        let pose = model.forward_kinematics(&[0.0; DOF], &[0.0; DOF]);
        assert!(pose.center.x.abs() <= 2.5);
        assert!(pose.center.y >= -3.5 && pose.center.y <= 1.0);
        assert!(pose.center.z >= -0.8 && pose.center.z <= 2.0);
    }

    #[test]
    fn x_prismatic_translates_paddle_exactly() {
        let model = RobotModel::default();
        let chain = model.chain();
        let mut q = model.center_pose;
        let (c0, _) = chain.paddle_pose(&q);
        q[0] += 0.17;
        let (c1, _) = chain.paddle_pose(&q);
        assert_relative_eq!(c1.x - c0.x, 0.17, epsilon = 1e-12);
        assert_relative_eq!(c1.y - c0.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(c1.z - c0.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_is_unit_for_random_configurations() {
        let model = RobotModel::default();
        let chain = model.chain();
        let mut rng = crate::rng::rng_for(3, &[7]);
        use rand::Rng;
        for _ in 0..200 {
            let mut q = [0.0; DOF];
            for (qi, joint) in q.iter_mut().zip(&model.joints) {
                *qi = rng.gen_range(joint.limits[0]..=joint.limits[1]);
            }
            let (_, normal) = chain.paddle_pose(&q);
            assert!((normal.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn paddle_velocity_tracks_prismatic_rate() {
        let model = RobotModel::default();
        let mut qdot = [0.0; DOF];
        qdot[0] = 0.8;
        let pose = model.forward_kinematics(&model.center_pose, &qdot);
        assert_relative_eq!(pose.velocity.x, 0.8, epsilon = 1e-6);
        assert_relative_eq!(pose.velocity.y, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn reference_pose_is_collision_free() {
        let model = RobotModel::default();
        let chain = model.chain();
        let physics = PhysicsParams::default();
        for pose in [model.forehand_pose, model.center_pose, model.backhand_pose] {
            let flags = chain.collision_flags(&pose, &physics);
            assert!(!flags.table, "reference pose touches the table");
            assert!(!flags.self_collision, "reference pose self-collides");
        }
    }

    #[test]
    fn reference_stances_cover_the_strike_zone() {
        let model = RobotModel::default();
        let chain = model.chain();
        let (fore_c, fore_n) = chain.paddle_pose(&model.forehand_pose);
        assert!(fore_c.x > 0.2, "forehand paddle x {}", fore_c.x);
        assert!(fore_c.z > 0.25 && fore_c.z < 0.6);
        assert!(fore_n.y > 0.5, "blade faces the opponent");
        let (center_c, center_n) = chain.paddle_pose(&model.center_pose);
        assert!(center_c.x.abs() < 1e-9);
        assert!(center_n.x.abs() < 1e-9);
    }

    #[test]
    fn backhand_pose_mirrors_forehand() {
        let model = RobotModel::default();
        let chain = model.chain();
        let (fore_c, fore_n) = chain.paddle_pose(&model.forehand_pose);
        let (back_c, back_n) = chain.paddle_pose(&model.backhand_pose);
        assert_relative_eq!(back_c.x, -fore_c.x, epsilon = 1e-9);
        assert_relative_eq!(back_c.y, fore_c.y, epsilon = 1e-9);
        assert_relative_eq!(back_c.z, fore_c.z, epsilon = 1e-9);
        assert_relative_eq!(back_n.x, -fore_n.x, epsilon = 1e-9);
        assert_relative_eq!(back_n.y, fore_n.y, epsilon = 1e-9);
        assert_relative_eq!(back_n.z, fore_n.z, epsilon = 1e-9);
    }

    #[test]
    fn segment_distance_basics() {
        let d = segment_distance(
            &Vector3::new(0.0, 0.0, 0.0),
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(0.0, 1.0, 0.0),
            &Vector3::new(1.0, 1.0, 0.0),
        );
        assert_relative_eq!(d, 1.0, epsilon = 1e-12);
        // Crossing segments touch.
        let d = segment_distance(
            &Vector3::new(-1.0, 0.0, 0.0),
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(0.0, -1.0, 0.1),
            &Vector3::new(0.0, 1.0, 0.1),
        );
        assert_relative_eq!(d, 0.1, epsilon = 1e-12);
    }
}
