//! Reward terms: sparse hit/success, style penalties, side-conditioned pose
//! rewards, and success shaping, plus the streaming per-step accumulator.
//!
//! Sign convention: rewards are added, penalties are negative contributions.
//! Every per-step penalty accrues proportionally to the positive excess over
//! its threshold, summed over steps (uncapped).

use serde::{Deserialize, Serialize};

use super::record::{EpisodeRecord, DOF};
use crate::sim::{RobotModel, Side};

/// Side-conditioned pose reward variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseMode {
    /// No pose shaping.
    None,
    /// Conditional pose state: `1 - d` to the correct side's reference pose.
    Cps,
    /// Dense conditional pose state: signed difference of the two CPS terms,
    /// scaled down near the table center.
    Dcps,
    /// Conditional pose timesteps: fraction of pre-contact steps spent in the
    /// correct half of the classification joints' ranges.
    Cpt,
}

fn default_landing_bonus() -> f64 {
    1.0
}

/// Success-signal shaping; at most one mode is active.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessShaping {
    None,
    /// Distance-to-table reward `max(1 - d, -2)` on the return trajectory.
    Dtr,
    /// Extra bonus added to the success reward.
    LandingBonus {
        #[serde(default = "default_landing_bonus")]
        bonus: f64,
    },
}

/// Weighted reward configuration. Defaults give the bare sparse reward; use
/// [`RewardConfig::canonical`] for the full style-shaped set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Reward for paddle contact.
    pub hit_reward: f64,
    /// Reward for landing the return on the opponent half.
    pub success_reward: f64,

    /// Fixed penalty if the arm self-collides or touches the table.
    pub collision_weight: f64,
    /// Per-step penalty weight for rotating the base joint backwards.
    pub base_rotation_weight: f64,
    /// Base-joint angle below which the backward penalty accrues, radians.
    pub base_rotation_threshold: f64,
    /// Index of the base joint in the joint vector.
    pub base_joint: usize,
    /// Per-step penalty weight for a paddle below the clearance height.
    pub paddle_height_weight: f64,
    /// Paddle clearance above the table top, meters.
    pub paddle_clearance: f64,
    /// Per-step penalty weight for joints close to their limits.
    pub joint_margin_weight: f64,
    /// Margin as a fraction of each joint's range.
    pub joint_margin_fraction: f64,
    /// Joint limits used by the margin penalty (defaults to the stock robot).
    pub joint_limits: [[f64; 2]; DOF],

    /// Per-step penalty weights and thresholds for speed/smoothness excesses.
    pub velocity_weight: f64,
    pub velocity_limit: f64,
    pub accel_weight: f64,
    pub accel_limit: f64,
    pub jerk_weight: f64,
    pub jerk_limit: f64,

    pub pose_mode: PoseMode,
    pub pose_weight: f64,
    /// Landing-|x| width over which the center weight ramps from 0 to 1.
    pub center_width: f64,
    /// Reference poses for the pose rewards (default: the reset poses).
    pub forehand_reference: [f64; DOF],
    pub backhand_reference: [f64; DOF],
    /// Joints whose range halves classify forehand vs backhand poses.
    pub cpt_joints: [usize; 2],
    /// Sign of (q - range midpoint) that counts as the forehand half.
    pub cpt_forehand_sign: [f64; 2],

    pub success_shaping: SuccessShaping,
}

impl Default for RewardConfig {
    fn default() -> Self {
        let robot = RobotModel::default();
        let mut joint_limits = [[0.0; 2]; DOF];
        for (dst, joint) in joint_limits.iter_mut().zip(&robot.joints) {
            *dst = joint.limits;
        }
        RewardConfig {
            hit_reward: 1.0,
            success_reward: 1.0,
            collision_weight: 0.0,
            base_rotation_weight: 0.0,
            // 25% of the base joint's backward range beyond neutral.
            base_rotation_threshold: -0.72,
            base_joint: 2,
            paddle_height_weight: 0.0,
            paddle_clearance: 0.05,
            joint_margin_weight: 0.0,
            joint_margin_fraction: 0.05,
            joint_limits,
            // Speed thresholds: three times the measured random-policy
            // baselines on the stock robot (V 2.4 rad/s, A 162 rad/s^2,
            // J 16.2k rad/s^3).
            velocity_weight: 0.0,
            velocity_limit: 7.0,
            accel_weight: 0.0,
            accel_limit: 500.0,
            jerk_weight: 0.0,
            jerk_limit: 50_000.0,
            pose_mode: PoseMode::None,
            pose_weight: 1.0,
            center_width: 0.2,
            forehand_reference: robot.forehand_pose,
            backhand_reference: robot.backhand_pose,
            cpt_joints: [2, 5],
            cpt_forehand_sign: [-1.0, 1.0],
            success_shaping: SuccessShaping::None,
        }
    }
}

impl RewardConfig {
    /// Bare sparse reward: +1 hit, +1 success.
    pub fn sparse() -> Self {
        RewardConfig::default()
    }

    /// Full style-shaped reward set: sparse terms plus collision, base
    /// rotation, paddle height, joint margin, and velocity/acceleration/jerk
    /// penalties. The speed limits are three times the measured random-policy
    /// baselines on the stock robot.
    pub fn canonical() -> Self {
        RewardConfig {
            collision_weight: 1.0,
            base_rotation_weight: 0.5,
            paddle_height_weight: 0.1,
            joint_margin_weight: 0.1,
            velocity_weight: 0.1,
            accel_weight: 0.1,
            jerk_weight: 0.1,
            ..RewardConfig::default()
        }
    }

    pub fn with_pose(mut self, mode: PoseMode) -> Self {
        self.pose_mode = mode;
        self
    }

    pub fn with_success_shaping(mut self, shaping: SuccessShaping) -> Self {
        self.success_shaping = shaping;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        let finite = [
            self.hit_reward,
            self.success_reward,
            self.collision_weight,
            self.base_rotation_weight,
            self.paddle_height_weight,
            self.joint_margin_weight,
            self.velocity_weight,
            self.accel_weight,
            self.jerk_weight,
            self.pose_weight,
        ];
        if finite.iter().any(|w| !w.is_finite()) {
            return Err(crate::Error::Config("reward weights must be finite".into()));
        }
        if self.center_width <= 0.0 {
            return Err(crate::Error::Config("center_width must be positive".into()));
        }
        if self.base_joint >= DOF || self.cpt_joints.iter().any(|&j| j >= DOF) {
            return Err(crate::Error::Config("reward joint index out of range".into()));
        }
        Ok(())
    }

    fn joint_margins(&self) -> [(f64, f64); DOF] {
        let mut out = [(0.0, 0.0); DOF];
        for (i, lim) in self.joint_limits.iter().enumerate() {
            let margin = self.joint_margin_fraction * (lim[1] - lim[0]);
            out[i] = (lim[0] + margin, lim[1] - margin);
        }
        out
    }
}

/// Per-term contributions; `total` is their sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub sparse: f64,
    pub collision: f64,
    pub base_rotation: f64,
    pub paddle_height: f64,
    pub joint_margin: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
    pub pose: f64,
    pub success_shaping: f64,
}

impl RewardBreakdown {
    pub fn total(&self) -> f64 {
        self.sparse
            + self.collision
            + self.base_rotation
            + self.paddle_height
            + self.joint_margin
            + self.velocity
            + self.acceleration
            + self.jerk
            + self.pose
            + self.success_shaping
    }
}

/// Sparse hit/success reward with unit weights.
pub fn sparse_rewards(rec: &EpisodeRecord) -> f64 {
    (rec.events.hit as u8) as f64 + (rec.events.success as u8) as f64
}

/// Style penalty contributions (all `<= 0`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StylePenalties {
    pub collision: f64,
    pub base_rotation: f64,
    pub paddle_height: f64,
    pub joint_margin: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub jerk: f64,
}

pub fn style_penalties(rec: &EpisodeRecord, cfg: &RewardConfig) -> StylePenalties {
    let mut out = StylePenalties::default();
    if rec.events.self_collision || rec.events.table_collision {
        out.collision = -cfg.collision_weight;
    }

    // Per-step pose penalties over the executed steps (rows 1..).
    let margins = cfg.joint_margins();
    for row in rec.joint_positions.iter().skip(1) {
        out.base_rotation -=
            cfg.base_rotation_weight * (cfg.base_rotation_threshold - row[cfg.base_joint]).max(0.0);
        let mut margin_excess = 0.0;
        for (q, (lo, hi)) in row.iter().zip(margins.iter()) {
            margin_excess += (lo - q).max(0.0) + (q - hi).max(0.0);
        }
        out.joint_margin -= cfg.joint_margin_weight * margin_excess;
    }
    for &z in &rec.paddle_heights {
        out.paddle_height -= cfg.paddle_height_weight * (cfg.paddle_clearance - z).max(0.0);
    }

    // Speed/smoothness excesses on the finite-difference chains.
    for row in rec.velocities() {
        let mut excess = 0.0;
        for v in row {
            excess += (v.abs() - cfg.velocity_limit).max(0.0);
        }
        out.velocity -= cfg.velocity_weight * excess;
    }
    for row in rec.accelerations() {
        let mut excess = 0.0;
        for a in row {
            excess += (a.abs() - cfg.accel_limit).max(0.0);
        }
        out.acceleration -= cfg.accel_weight * excess;
    }
    for row in rec.jerks() {
        let mut excess = 0.0;
        for j in row {
            excess += (j.abs() - cfg.jerk_limit).max(0.0);
        }
        out.jerk -= cfg.jerk_weight * excess;
    }
    out
}

fn l2_distance(a: &[f64; DOF], b: &[f64; DOF]) -> f64 {
    let mut acc = 0.0;
    for i in 0..DOF {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc.sqrt()
}

/// Minimum pre-contact joint-space distance to a reference pose.
fn min_reference_distance(rec: &EpisodeRecord, reference: &[f64; DOF]) -> f64 {
    let end = rec.pre_contact_end();
    rec.joint_positions[..=end]
        .iter()
        .fold(f64::INFINITY, |m, row| m.min(l2_distance(row, reference)))
}

/// Center weight: 0 at the table center, saturating to 1 at `center_width`.
fn center_weight(landing_x: f64, width: f64) -> f64 {
    (landing_x.abs() / width).clamp(0.0, 1.0)
}

/// CPS: `1 - d` where `d` is the minimum pre-contact distance to the
/// reference pose of the side the throw lands on.
pub fn pose_reward_cps(rec: &EpisodeRecord, cfg: &RewardConfig, side: Side) -> f64 {
    let reference = match side {
        Side::Backhand => &cfg.backhand_reference,
        // Ties (landing exactly at center) count as forehand.
        Side::Forehand | Side::Center => &cfg.forehand_reference,
    };
    1.0 - min_reference_distance(rec, reference)
}

/// DCPS: signed CPS difference, scaled down for landings near the center.
pub fn pose_reward_dcps(rec: &EpisodeRecord, cfg: &RewardConfig, landing_x: f64) -> f64 {
    let w = center_weight(landing_x, cfg.center_width);
    if w == 0.0 {
        return 0.0;
    }
    let forehand = 1.0 - min_reference_distance(rec, &cfg.forehand_reference);
    let backhand = 1.0 - min_reference_distance(rec, &cfg.backhand_reference);
    if landing_x >= 0.0 {
        w * (forehand - backhand)
    } else {
        w * (backhand - forehand)
    }
}

/// CPT: fraction of pre-contact poses in the correct side's half of the
/// classification joints' ranges, minus the fraction in the wrong half.
pub fn pose_reward_cpt(rec: &EpisodeRecord, cfg: &RewardConfig, landing_x: f64) -> f64 {
    let w = center_weight(landing_x, cfg.center_width);
    if w == 0.0 {
        return 0.0;
    }
    let end = rec.pre_contact_end();
    let rows = &rec.joint_positions[..=end];
    let mut forehand_steps = 0_usize;
    let mut backhand_steps = 0_usize;
    for row in rows {
        match classify_pose(row, cfg) {
            Some(Side::Forehand) => forehand_steps += 1,
            Some(Side::Backhand) => backhand_steps += 1,
            _ => {}
        }
    }
    let total = rows.len() as f64;
    let t_forehand = forehand_steps as f64 / total;
    let t_backhand = backhand_steps as f64 / total;
    if landing_x >= 0.0 {
        w * (t_forehand - t_backhand)
    } else {
        w * (t_backhand - t_forehand)
    }
}

/// Forehand iff both classification joints sit strictly in the forehand half
/// of their ranges; backhand iff both sit strictly in the other half.
fn classify_pose(row: &[f64; DOF], cfg: &RewardConfig) -> Option<Side> {
    let mut forehand = true;
    let mut backhand = true;
    for (&j, &sign) in cfg.cpt_joints.iter().zip(cfg.cpt_forehand_sign.iter()) {
        let lim = cfg.joint_limits[j];
        let mid = 0.5 * (lim[0] + lim[1]);
        let offset = (row[j] - mid) * sign;
        forehand &= offset > 0.0;
        backhand &= offset < 0.0;
    }
    match (forehand, backhand) {
        (true, false) => Some(Side::Forehand),
        (false, true) => Some(Side::Backhand),
        _ => None,
    }
}

/// DTR: `max(1 - d, -2)` on the minimum distance between the post-contact
/// ball and the opponent table surface; 0 when the paddle never hit.
pub fn dtr_reward(rec: &EpisodeRecord) -> f64 {
    if !rec.events.hit {
        return 0.0;
    }
    let d = rec.events.min_return_distance.unwrap_or(f64::INFINITY);
    (1.0 - d).max(-2.0)
}

/// Weighted sum of all enabled terms with a per-term breakdown.
pub fn total_reward(rec: &EpisodeRecord, cfg: &RewardConfig) -> RewardBreakdown {
    let style = style_penalties(rec, cfg);
    let mut out = RewardBreakdown {
        sparse: cfg.hit_reward * (rec.events.hit as u8) as f64
            + cfg.success_reward * (rec.events.success as u8) as f64,
        collision: style.collision,
        base_rotation: style.base_rotation,
        paddle_height: style.paddle_height,
        joint_margin: style.joint_margin,
        velocity: style.velocity,
        acceleration: style.acceleration,
        jerk: style.jerk,
        pose: 0.0,
        success_shaping: 0.0,
    };
    out.pose = match cfg.pose_mode {
        PoseMode::None => 0.0,
        PoseMode::Cps => cfg.pose_weight * pose_reward_cps(rec, cfg, rec.throw.side),
        PoseMode::Dcps => cfg.pose_weight * pose_reward_dcps(rec, cfg, rec.landing_x()),
        PoseMode::Cpt => cfg.pose_weight * pose_reward_cpt(rec, cfg, rec.landing_x()),
    };
    out.success_shaping = match cfg.success_shaping {
        SuccessShaping::None => 0.0,
        SuccessShaping::Dtr => dtr_reward(rec),
        SuccessShaping::LandingBonus { bonus } => {
            if rec.events.success {
                bonus
            } else {
                0.0
            }
        }
    };
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{EpisodeEvents, TerminationReason, ThrowSpec};
    use nalgebra::{Vector2, Vector3};

    fn record(positions: Vec<[f64; DOF]>, landing_x: f64) -> EpisodeRecord {
        let steps = positions.len() - 1;
        EpisodeRecord {
            dt: 0.01,
            joint_positions: positions,
            paddle_heights: vec![0.3; steps],
            ball_positions: vec![[0.0; 3]; steps + 1],
            events: EpisodeEvents::default(),
            throw: ThrowSpec {
                start: Vector3::new(0.0, 1.8, 0.4),
                velocity: Vector3::new(0.0, -5.0, 1.5),
                target: Vector2::new(landing_x, -0.8),
                side: Side::from_landing_x(landing_x),
            },
            termination: TerminationReason::StepCap,
        }
    }

    fn motionless(steps: usize, pose: [f64; DOF], landing_x: f64) -> EpisodeRecord {
        record(vec![pose; steps + 1], landing_x)
    }

    #[test]
    fn sparse_reward_ladder() {
        let mut rec = motionless(10, [0.0; DOF], 0.3);
        assert_eq!(sparse_rewards(&rec), 0.0);
        rec.events.hit = true;
        rec.events.contact_step = Some(5);
        assert_eq!(sparse_rewards(&rec), 1.0);
        rec.events.success = true;
        assert_eq!(sparse_rewards(&rec), 2.0);
    }

    #[test]
    fn single_velocity_excess_is_weighted_linearly() {
        let mut cfg = RewardConfig::sparse();
        cfg.velocity_weight = 0.1;
        cfg.velocity_limit = 1.0;
        // One joint moves for one step at velocity limit + x.
        let excess = 0.75;
        let step_delta = (cfg.velocity_limit + excess) * 0.01;
        let mut positions = vec![[0.0; DOF]; 6];
        for row in positions.iter_mut().skip(1) {
            row[3] = step_delta;
        }
        let rec = record(positions, 0.3);
        let style = style_penalties(&rec, &cfg);
        assert!((style.velocity - (-cfg.velocity_weight * excess)).abs() < 1e-9);
    }

    #[test]
    fn joint_margin_accrues_per_step() {
        let mut cfg = RewardConfig::sparse();
        cfg.joint_margin_weight = 0.2;
        cfg.joint_margin_fraction = 0.05;
        let lim = cfg.joint_limits[4];
        let margin = 0.05 * (lim[1] - lim[0]);
        let intrusion = 0.6 * margin;
        let mut pose = [0.0; DOF];
        pose[1] = 0.45; // keep the gantry clear of its own margin
        pose[4] = lim[1] - margin + intrusion;
        // Grazing the limit margin for every one of k executed steps.
        let k = 7;
        let rec = motionless(k, pose, 0.3);
        let style = style_penalties(&rec, &cfg);
        let expected = -(k as f64) * cfg.joint_margin_weight * intrusion;
        assert!(
            (style.joint_margin - expected).abs() < 1e-9,
            "{} vs {expected}",
            style.joint_margin
        );
    }

    #[test]
    fn cps_rewards_proximity_to_the_correct_reference() {
        let cfg = RewardConfig::sparse();
        // Passing exactly through the forehand reference.
        let mut positions = vec![[0.5; DOF]; 4];
        positions.push(cfg.forehand_reference);
        positions.push([0.5; DOF]);
        let rec = record(positions, 0.4);
        assert!((pose_reward_cps(&rec, &cfg, Side::Forehand) - 1.0).abs() < 1e-12);

        // Constant pose at joint-space distance 0.5.
        let mut offset = cfg.forehand_reference;
        offset[0] += 0.3;
        offset[1] += 0.4;
        let rec = motionless(10, offset, 0.4);
        assert!((pose_reward_cps(&rec, &cfg, Side::Forehand) - 0.5).abs() < 1e-12);

        // Backhand throws never read the forehand reference.
        let mut cfg2 = cfg.clone();
        cfg2.forehand_reference = [9.0; DOF];
        let rec = motionless(10, offset, -0.4);
        assert_eq!(
            pose_reward_cps(&rec, &cfg, Side::Backhand),
            pose_reward_cps(&rec, &cfg2, Side::Backhand)
        );
    }

    #[test]
    fn dcps_examples() {
        let cfg = RewardConfig::sparse();
        // Landing at the exact center: zero regardless of pose.
        let rec = motionless(10, cfg.forehand_reference, 0.0);
        assert_eq!(pose_reward_dcps(&rec, &cfg, 0.0), 0.0);

        // Pose equidistant from both references: zero.
        let center = cfg.center_pose_equidistant();
        let rec = motionless(10, center, 0.5);
        assert!(pose_reward_dcps(&rec, &cfg, 0.5).abs() < 1e-12);

        // Forehand throw far from center, pose at the forehand reference:
        // reward is w * d_backhand > 0.
        let rec = motionless(10, cfg.forehand_reference, 0.5);
        let d_backhand = {
            let mut acc = 0.0;
            for i in 0..DOF {
                let d = cfg.forehand_reference[i] - cfg.backhand_reference[i];
                acc += d * d;
            }
            acc.sqrt()
        };
        let expected = 1.0 * d_backhand; // w saturates to 1 beyond center_width
        assert!((pose_reward_dcps(&rec, &cfg, 0.5) - expected).abs() < 1e-12);
    }

    #[test]
    fn cpt_examples() {
        let mut cfg = RewardConfig::sparse();
        cfg.cpt_joints = [2, 5];
        cfg.cpt_forehand_sign = [-1.0, 1.0];
        let mid = |j: usize| 0.5 * (cfg.joint_limits[j][0] + cfg.joint_limits[j][1]);

        // Every step in the forehand half: +w.
        let mut forehand_pose = [0.0; DOF];
        forehand_pose[2] = mid(2) - 0.5;
        forehand_pose[5] = mid(5) + 0.5;
        let rec = motionless(12, forehand_pose, 0.6);
        assert!((pose_reward_cpt(&rec, &cfg, 0.6) - 1.0).abs() < 1e-12);

        // Every step in the neither region (joints straddle the halves): 0.
        let mut neither_pose = [0.0; DOF];
        neither_pose[2] = mid(2) - 0.5;
        neither_pose[5] = mid(5) - 0.5;
        let rec = motionless(12, neither_pose, 0.6);
        assert_eq!(pose_reward_cpt(&rec, &cfg, 0.6), 0.0);

        // Half the steps forehand, half backhand: 0.
        let mut backhand_pose = [0.0; DOF];
        backhand_pose[2] = mid(2) + 0.5;
        backhand_pose[5] = mid(5) - 0.5;
        let mut positions = vec![forehand_pose; 6];
        positions.extend(vec![backhand_pose; 6]);
        let rec = record(positions, 0.6);
        assert!(pose_reward_cpt(&rec, &cfg, 0.6).abs() < 1e-12);
    }

    #[test]
    fn dtr_examples() {
        let mut rec = motionless(10, [0.0; DOF], 0.3);
        rec.events.hit = true;
        rec.events.contact_step = Some(3);
        rec.events.min_return_distance = Some(0.0);
        assert_eq!(dtr_reward(&rec), 1.0);
        rec.events.min_return_distance = Some(3.5);
        assert_eq!(dtr_reward(&rec), -2.0);
        rec.events.min_return_distance = Some(0.4);
        assert!((dtr_reward(&rec) - 0.6).abs() < 1e-12);
        rec.events.hit = false;
        assert_eq!(dtr_reward(&rec), 0.0);
    }

    #[test]
    fn sparse_only_config_equals_sparse_rewards() {
        let cfg = RewardConfig::sparse();
        let mut rec = motionless(10, [0.1; DOF], 0.3);
        rec.events.hit = true;
        rec.events.contact_step = Some(2);
        rec.events.success = true;
        rec.events.min_return_distance = Some(0.0);
        let breakdown = total_reward(&rec, &cfg);
        assert_eq!(breakdown.total(), sparse_rewards(&rec));
    }

    #[test]
    fn motionless_miss_scores_zero_under_canonical_rewards() {
        let cfg = RewardConfig::canonical();
        let rec = motionless(20, RobotModel::default().forehand_pose, 0.3);
        let breakdown = total_reward(&rec, &cfg);
        assert_eq!(breakdown.total(), 0.0, "{breakdown:?}");
    }

    impl RewardConfig {
        /// Test helper: a pose equidistant from both references.
        fn center_pose_equidistant(&self) -> [f64; DOF] {
            let mut pose = [0.0; DOF];
            for i in 0..DOF {
                pose[i] = 0.5 * (self.forehand_reference[i] + self.backhand_reference[i]);
            }
            pose
        }
    }
}

/// Streaming reward accumulator: identical arithmetic to [`total_reward`]
/// applied one step at a time, without retaining the trajectory.
pub struct RewardAccumulator {
    cfg: RewardConfig,
    margins: [(f64, f64); DOF],
    // Position ring for the finite-difference chains (newest last).
    positions: [[f64; DOF]; 4],
    filled: usize,
    velocity_sum: f64,
    accel_sum: f64,
    jerk_sum: f64,
    base_rotation_sum: f64,
    joint_margin_sum: f64,
    paddle_height_sum: f64,
    min_forehand: f64,
    min_backhand: f64,
    forehand_steps: usize,
    backhand_steps: usize,
    pre_contact_rows: usize,
    dt: f64,
}

impl RewardAccumulator {
    /// Starts an episode at the reset pose (pose row 0).
    pub fn new(cfg: &RewardConfig, dt: f64, initial_pose: &[f64; DOF]) -> Self {
        let mut acc = RewardAccumulator {
            cfg: cfg.clone(),
            margins: cfg.joint_margins(),
            positions: [[0.0; DOF]; 4],
            filled: 0,
            velocity_sum: 0.0,
            accel_sum: 0.0,
            jerk_sum: 0.0,
            base_rotation_sum: 0.0,
            joint_margin_sum: 0.0,
            paddle_height_sum: 0.0,
            min_forehand: f64::INFINITY,
            min_backhand: f64::INFINITY,
            forehand_steps: 0,
            backhand_steps: 0,
            pre_contact_rows: 0,
            dt,
        };
        acc.positions[0] = *initial_pose;
        acc.filled = 1;
        acc.track_pose(initial_pose);
        acc
    }

    fn track_pose(&mut self, row: &[f64; DOF]) {
        self.pre_contact_rows += 1;
        self.min_forehand = self
            .min_forehand
            .min(l2_distance(row, &self.cfg.forehand_reference));
        self.min_backhand = self
            .min_backhand
            .min(l2_distance(row, &self.cfg.backhand_reference));
        match classify_pose(row, &self.cfg) {
            Some(Side::Forehand) => self.forehand_steps += 1,
            Some(Side::Backhand) => self.backhand_steps += 1,
            _ => {}
        }
    }

    /// Feeds the pose produced by one control step. `pre_contact` is whether
    /// the paddle had still not touched the ball after this step.
    pub fn push_step(&mut self, q: &[f64; DOF], paddle_z: f64, pre_contact: bool) {
        if self.filled == 4 {
            self.positions.rotate_left(1);
            self.positions[3] = *q;
        } else {
            self.positions[self.filled] = *q;
            self.filled += 1;
        }

        let cfg = &self.cfg;
        self.base_rotation_sum -=
            cfg.base_rotation_weight * (cfg.base_rotation_threshold - q[cfg.base_joint]).max(0.0);
        let mut margin_excess = 0.0;
        for (qv, (lo, hi)) in q.iter().zip(self.margins.iter()) {
            margin_excess += (lo - qv).max(0.0) + (qv - hi).max(0.0);
        }
        self.joint_margin_sum -= cfg.joint_margin_weight * margin_excess;
        self.paddle_height_sum -=
            cfg.paddle_height_weight * (cfg.paddle_clearance - paddle_z).max(0.0);

        // Newest finite-difference rows.
        let n = self.filled;
        let p = &self.positions;
        let dt = self.dt;
        if n >= 2 {
            let mut excess = 0.0;
            for i in 0..DOF {
                let v = (p[n - 1][i] - p[n - 2][i]) / dt;
                excess += (v.abs() - cfg.velocity_limit).max(0.0);
            }
            self.velocity_sum -= cfg.velocity_weight * excess;
        }
        if n >= 3 {
            let mut excess = 0.0;
            for i in 0..DOF {
                let v1 = (p[n - 1][i] - p[n - 2][i]) / dt;
                let v0 = (p[n - 2][i] - p[n - 3][i]) / dt;
                let a = (v1 - v0) / dt;
                excess += (a.abs() - cfg.accel_limit).max(0.0);
            }
            self.accel_sum -= cfg.accel_weight * excess;
        }
        if n >= 4 {
            let mut excess = 0.0;
            for i in 0..DOF {
                let v2 = (p[3][i] - p[2][i]) / dt;
                let v1 = (p[2][i] - p[1][i]) / dt;
                let v0 = (p[1][i] - p[0][i]) / dt;
                let j = ((v2 - v1) / dt - (v1 - v0) / dt) / dt;
                excess += (j.abs() - cfg.jerk_limit).max(0.0);
            }
            self.jerk_sum -= cfg.jerk_weight * excess;
        }

        if pre_contact {
            self.track_pose(q);
        }
    }

    /// Final breakdown given the episode events and throw.
    pub fn finish(&self, rec_events: &crate::sim::EpisodeEvents, throw: &crate::sim::ThrowSpec) -> RewardBreakdown {
        let cfg = &self.cfg;
        let mut out = RewardBreakdown {
            sparse: cfg.hit_reward * (rec_events.hit as u8) as f64
                + cfg.success_reward * (rec_events.success as u8) as f64,
            collision: if rec_events.self_collision || rec_events.table_collision {
                -cfg.collision_weight
            } else {
                0.0
            },
            base_rotation: self.base_rotation_sum,
            paddle_height: self.paddle_height_sum,
            joint_margin: self.joint_margin_sum,
            velocity: self.velocity_sum,
            acceleration: self.accel_sum,
            jerk: self.jerk_sum,
            pose: 0.0,
            success_shaping: 0.0,
        };
        let landing_x = throw.target.x;
        let w = center_weight(landing_x, cfg.center_width);
        out.pose = match cfg.pose_mode {
            PoseMode::None => 0.0,
            PoseMode::Cps => {
                let d = match throw.side {
                    Side::Backhand => self.min_backhand,
                    Side::Forehand | Side::Center => self.min_forehand,
                };
                cfg.pose_weight * (1.0 - d)
            }
            PoseMode::Dcps => {
                if w == 0.0 {
                    0.0
                } else {
                    let diff = (1.0 - self.min_forehand) - (1.0 - self.min_backhand);
                    cfg.pose_weight * if landing_x >= 0.0 { w * diff } else { -(w * diff) }
                }
            }
            PoseMode::Cpt => {
                if w == 0.0 {
                    0.0
                } else {
                    let total = self.pre_contact_rows as f64;
                    let tf = self.forehand_steps as f64 / total;
                    let tb = self.backhand_steps as f64 / total;
                    cfg.pose_weight * if landing_x >= 0.0 { w * (tf - tb) } else { w * (tb - tf) }
                }
            }
        };
        out.success_shaping = match cfg.success_shaping {
            SuccessShaping::None => 0.0,
            SuccessShaping::Dtr => {
                if rec_events.hit {
                    let d = rec_events.min_return_distance.unwrap_or(f64::INFINITY);
                    (1.0 - d).max(-2.0)
                } else {
                    0.0
                }
            }
            SuccessShaping::LandingBonus { bonus } => {
                if rec_events.success {
                    bonus
                } else {
                    0.0
                }
            }
        };
        out
    }
}
