//! Episode environment: 100 Hz control loop over joint velocities with 1 kHz
//! ball physics, paddle contact, observation noise/delays, and event logging.

use nalgebra::{Unit, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ball::{predict_landing_x, step_ball, BallState, PhysicsParams};
use super::robot::{KinematicChain, RobotModel, DOF};
use super::throw::{sample_throw, BallDistribution, DistributionKind, ThrowSpec};
use crate::error::{Error, Result};
use crate::rng;

/// Number of history steps in an observation.
pub const OBS_HISTORY: usize = 8;
/// Features per history step: joint positions plus the 3D ball position.
pub const OBS_FEATURES: usize = DOF + 3;
/// Action dimension: one velocity command per joint.
pub const ACTION_DIM: usize = DOF;

/// Named reset pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPose {
    Forehand,
    Center,
}

impl InitPose {
    /// Pose used when the config does not pin one: forehand throws start from
    /// the forehand pose, wider distributions from the central pose.
    pub fn for_distribution(kind: DistributionKind) -> InitPose {
        match kind {
            DistributionKind::Forehand => InitPose::Forehand,
            _ => InitPose::Center,
        }
    }
}

/// Observation noise and delay model. Delays are drawn per episode and held
/// constant until the next reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseDelayParams {
    /// Uniform ball-position noise amplitude per axis, meters.
    pub ball_noise: f64,
    /// Maximum ball observation delay, steps.
    pub max_ball_delay: usize,
    /// Maximum robot observation delay, steps.
    pub max_robot_delay: usize,
    /// Maximum action delay, steps.
    pub max_action_delay: usize,
}

impl Default for NoiseDelayParams {
    fn default() -> Self {
        NoiseDelayParams {
            ball_noise: 0.005,
            max_ball_delay: 4,
            max_robot_delay: 4,
            max_action_delay: 4,
        }
    }
}

impl NoiseDelayParams {
    /// Disables noise and all delays; used by evaluation in noiseless mode.
    pub fn none() -> Self {
        NoiseDelayParams {
            ball_noise: 0.0,
            max_ball_delay: 0,
            max_robot_delay: 0,
            max_action_delay: 0,
        }
    }
}

/// Environment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub physics: PhysicsParams,
    pub robot: RobotModel,
    pub noise: NoiseDelayParams,
    pub throw: BallDistribution,
    /// Control period, seconds.
    pub control_dt: f64,
    /// Ball physics sub-steps per control step.
    pub physics_substeps: usize,
    /// Episode cap in control steps.
    pub max_steps: usize,
    /// Episode ends when the ball passes behind this plane.
    pub back_plane_y: f64,
    /// Reset pose; `None` derives it from the throw distribution.
    pub init_pose: Option<InitPose>,
    /// Uniform reset-pose perturbation amplitude (rad or m per joint).
    pub init_pose_jitter: f64,
    /// Extra paddle contact margin on top of the ball radius, meters.
    pub contact_margin: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            physics: PhysicsParams::default(),
            robot: RobotModel::default(),
            noise: NoiseDelayParams::default(),
            throw: BallDistribution::default(),
            control_dt: 0.01,
            physics_substeps: 10,
            max_steps: 300,
            back_plane_y: -3.0,
            init_pose: None,
            init_pose_jitter: 0.02,
            contact_margin: 0.005,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.throw.validate()?;
        if self.control_dt <= 0.0 {
            return Err(Error::Config("control_dt must be positive".into()));
        }
        if self.physics_substeps == 0 {
            return Err(Error::Config("physics_substeps must be at least 1".into()));
        }
        if self.control_dt / self.physics_substeps as f64 > 1e-3 + 1e-12 {
            return Err(Error::Config(
                "ball physics must sub-step at 1 ms or finer".into(),
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Why an episode ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// Ball left play (floor, net, bounds).
    BallDead,
    /// The return landed; outcome decided.
    Resolved,
    /// Step cap reached.
    StepCap,
    /// Ball passed the back plane behind the robot.
    BackPlane,
}

/// Episode event log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvents {
    pub hit: bool,
    pub success: bool,
    pub self_collision: bool,
    pub table_collision: bool,
    pub net_hit: bool,
    /// Control step of the first paddle contact.
    pub contact_step: Option<usize>,
    /// First table bounce of the incoming throw.
    pub incoming_bounce: Option<Vector3<f64>>,
    /// Landing point of the return, if it reached a table surface.
    pub return_landing: Option<Vector3<f64>>,
    /// Minimum distance from the post-contact ball to the opponent half.
    pub min_return_distance: Option<f64>,
}

/// One control step's outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub terminated: Option<TerminationReason>,
}

/// Observation tensor: `OBS_HISTORY` rows, oldest first; per row the joint
/// positions followed by the (noisy, delayed) ball position.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation(pub [[f64; OBS_FEATURES]; OBS_HISTORY]);

impl Observation {
    pub fn rows(&self) -> &[[f64; OBS_FEATURES]; OBS_HISTORY] {
        &self.0
    }
}

/// Single-episode environment. One instance per rollout worker; instances
/// share nothing and may run in parallel given distinct seeds.
pub struct Env {
    cfg: EnvConfig,
    chain: KinematicChain,
    ready: bool,

    q: [f64; DOF],
    ball: BallState,
    throw: ThrowSpec,
    step_index: usize,
    terminated: Option<TerminationReason>,

    joint_history: Vec<[f64; DOF]>,
    ball_history: Vec<[f64; 3]>,
    ball_delay: usize,
    robot_delay: usize,
    action_queue: std::collections::VecDeque<[f64; ACTION_DIM]>,

    events: EpisodeEvents,
    contact_latch: bool,
    paddle_center: Vector3<f64>,
    paddle_normal: Unit<Vector3<f64>>,
    episode_rng: ChaCha8Rng,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let chain = cfg.robot.chain();
        let (paddle_center, paddle_normal) = chain.paddle_pose(&cfg.robot.center_pose);
        Ok(Env {
            cfg,
            chain,
            ready: false,
            q: [0.0; DOF],
            ball: BallState::new(Vector3::zeros(), Vector3::zeros()),
            throw: ThrowSpec {
                start: Vector3::zeros(),
                velocity: Vector3::zeros(),
                target: nalgebra::Vector2::zeros(),
                side: super::throw::Side::Center,
            },
            step_index: 0,
            terminated: None,
            joint_history: Vec::new(),
            ball_history: Vec::new(),
            ball_delay: 0,
            robot_delay: 0,
            action_queue: std::collections::VecDeque::new(),
            events: EpisodeEvents::default(),
            contact_latch: false,
            paddle_center,
            paddle_normal,
            episode_rng: rng::rng_for(0, &[rng::stream::ROLLOUT]),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn joints(&self) -> &[f64; DOF] {
        &self.q
    }

    pub fn ball(&self) -> &BallState {
        &self.ball
    }

    pub fn throw(&self) -> &ThrowSpec {
        &self.throw
    }

    pub fn events(&self) -> &EpisodeEvents {
        &self.events
    }

    pub fn paddle_center(&self) -> &Vector3<f64> {
        &self.paddle_center
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn terminated(&self) -> Option<TerminationReason> {
        self.terminated
    }

    /// Most recent observation feature row (joints + noisy ball); the stream
    /// the normalization statistics are estimated from.
    pub fn latest_feature_row(&self) -> [f64; OBS_FEATURES] {
        let mut row = [0.0; OBS_FEATURES];
        let joints = self.joint_history.last().expect("reset before use");
        let ball = self.ball_history.last().expect("reset before use");
        row[..DOF].copy_from_slice(joints);
        row[DOF..].copy_from_slice(ball);
        row
    }

    /// Starts a new episode: samples a throw, perturbs the reset pose, draws
    /// the per-episode delays, and warms the observation history.
    pub fn reset(&mut self, dist: &BallDistribution, seed: u64) -> Result<()> {
        let mut rng = rng::rng_for(seed, &[rng::stream::ROLLOUT]);
        self.throw = sample_throw(dist, &self.cfg.physics, &mut rng)?;
        self.ball = BallState::new(self.throw.start, self.throw.velocity);

        let pose_kind = self
            .cfg
            .init_pose
            .unwrap_or_else(|| InitPose::for_distribution(dist.kind));
        let reference = self.cfg.robot.reference_pose(pose_kind);
        for (i, (qi, &q_ref)) in self.q.iter_mut().zip(reference.iter()).enumerate() {
            let jitter = if self.cfg.init_pose_jitter > 0.0 {
                rng.gen_range(-self.cfg.init_pose_jitter..=self.cfg.init_pose_jitter)
            } else {
                0.0
            };
            *qi = self.cfg.robot.clamp_position(i, q_ref + jitter);
        }

        self.ball_delay = rng.gen_range(0..=self.cfg.noise.max_ball_delay);
        self.robot_delay = rng.gen_range(0..=self.cfg.noise.max_robot_delay);
        let action_delay = rng.gen_range(0..=self.cfg.noise.max_action_delay);

        self.action_queue.clear();
        for _ in 0..action_delay {
            self.action_queue.push_back([0.0; ACTION_DIM]);
        }

        self.step_index = 0;
        self.terminated = None;
        self.events = EpisodeEvents::default();
        self.contact_latch = false;
        let (c, n) = self.chain.paddle_pose(&self.q);
        self.paddle_center = c;
        self.paddle_normal = n;

        self.episode_rng = rng;
        self.joint_history.clear();
        self.ball_history.clear();
        let warmup = OBS_HISTORY + self.cfg.noise.max_ball_delay.max(self.cfg.noise.max_robot_delay);
        for _ in 0..warmup {
            self.push_history();
        }
        self.ready = true;
        Ok(())
    }

    fn push_history(&mut self) {
        self.joint_history.push(self.q);
        let amp = self.cfg.noise.ball_noise;
        let mut ball = [self.ball.position.x, self.ball.position.y, self.ball.position.z];
        if amp > 0.0 {
            for b in &mut ball {
                *b += self.episode_rng.gen_range(-amp..=amp);
            }
        }
        self.ball_history.push(ball);
    }

    /// Observation honoring the per-episode delays.
    pub fn observe(&self) -> Observation {
        let mut rows = [[0.0; OBS_FEATURES]; OBS_HISTORY];
        let last = self.joint_history.len() - 1;
        for (r, row) in rows.iter_mut().enumerate() {
            let back = OBS_HISTORY - 1 - r;
            let joints = &self.joint_history[last - self.robot_delay - back];
            let ball = &self.ball_history[last - self.ball_delay - back];
            row[..DOF].copy_from_slice(joints);
            row[DOF..].copy_from_slice(ball);
        }
        Observation(rows)
    }

    /// Advances one control step with the commanded joint velocities.
    pub fn step(&mut self, action: &[f64; ACTION_DIM]) -> Result<StepOutcome> {
        if !self.ready || self.terminated.is_some() {
            return Err(Error::EpisodeTerminated);
        }
        let dt = self.cfg.control_dt;

        // Action delay queue, then velocity clamping.
        self.action_queue.push_back(*action);
        let commanded = self.action_queue.pop_front().expect("queue nonempty");
        let mut q_next = [0.0; DOF];
        for i in 0..DOF {
            let limit = self.cfg.robot.joints[i].velocity_limit;
            let v = commanded[i].clamp(-limit, limit);
            q_next[i] = self.cfg.robot.clamp_position(i, self.q[i] + v * dt);
        }

        // Paddle pose at both ends of the step; velocity by finite difference.
        let (c0, n0) = (self.paddle_center, self.paddle_normal);
        let (c1, n1) = self.chain.paddle_pose(&q_next);
        let paddle_velocity = (c1 - c0) / dt;

        // Ball physics sub-steps with interpolated paddle pose.
        let substeps = self.cfg.physics_substeps;
        let sub_dt = dt / substeps as f64;
        let contact_threshold = self.cfg.physics.ball_radius + self.cfg.contact_margin;
        for s in 0..substeps {
            if !self.ball.live {
                break;
            }
            let prev_ball = self.ball;
            let (next_ball, flight) = step_ball(&self.ball, sub_dt, &self.cfg.physics);
            self.ball = next_ball;
            if flight.net_hit {
                self.events.net_hit = true;
            }

            if let Some(bounce) = flight.bounce {
                if self.events.hit {
                    self.events.return_landing = Some(bounce);
                    if bounce.y > 0.0 {
                        self.events.success = true;
                        self.events.min_return_distance = Some(0.0);
                    }
                    self.terminated = Some(TerminationReason::Resolved);
                } else if self.events.incoming_bounce.is_none() {
                    self.events.incoming_bounce = Some(bounce);
                }
            }

            if self.ball.live && self.terminated.is_none() {
                let alpha1 = (s + 1) as f64 / substeps as f64;
                let paddle_at = |alpha: f64| {
                    let center = c0 + (c1 - c0) * alpha;
                    let normal = Unit::new_normalize(
                        n0.into_inner() + (n1.into_inner() - n0.into_inner()) * alpha,
                    );
                    (center, normal)
                };
                let (pc, pn) = paddle_at(alpha1);
                if !self.contact_latch
                    && contact_predicate(&self.ball.position, &pc, &pn, contact_threshold, self.cfg.physics.paddle_radius)
                {
                    // Refine the contact instant inside the sub-step.
                    let alpha0 = s as f64 / substeps as f64;
                    let mut lo = 0.0_f64;
                    let mut hi = 1.0_f64;
                    for _ in 0..20 {
                        let mid = 0.5 * (lo + hi);
                        let ball_mid = prev_ball.coast(mid * sub_dt, self.cfg.physics.gravity);
                        let (pcm, pnm) = paddle_at(alpha0 + (alpha1 - alpha0) * mid);
                        if contact_predicate(
                            &ball_mid.position,
                            &pcm,
                            &pnm,
                            contact_threshold,
                            self.cfg.physics.paddle_radius,
                        ) {
                            hi = mid;
                        } else {
                            lo = mid;
                        }
                    }
                    let ball_contact = prev_ball.coast(hi * sub_dt, self.cfg.physics.gravity);
                    let (pcc, pnc) = paddle_at(alpha0 + (alpha1 - alpha0) * hi);
                    let reflected =
                        reflect_off_paddle(&ball_contact, &pcc, &pnc, &paddle_velocity, &self.cfg.physics);
                    // Coast out the rest of the sub-step with the new velocity.
                    let rest = (1.0 - hi) * sub_dt;
                    let (after, flight2) = step_ball(&reflected, rest.max(1e-9), &self.cfg.physics);
                    self.ball = after;
                    if flight2.net_hit {
                        self.events.net_hit = true;
                    }
                    if let Some(bounce) = flight2.bounce {
                        self.events.return_landing = Some(bounce);
                        if bounce.y > 0.0 {
                            self.events.success = true;
                            self.events.min_return_distance = Some(0.0);
                        }
                        self.terminated = Some(TerminationReason::Resolved);
                    }
                    self.events.hit = true;
                    if self.events.contact_step.is_none() {
                        self.events.contact_step = Some(self.step_index);
                    }
                    self.contact_latch = true;
                } else if self.contact_latch {
                    let rel = self.ball.position - pc;
                    if rel.dot(&pn).abs() > 2.0 * contact_threshold {
                        self.contact_latch = false;
                    }
                }
            }

            if self.events.hit && self.ball.live {
                let d = self.cfg.physics.distance_to_opponent_half(&self.ball.position);
                let min = self.events.min_return_distance.get_or_insert(f64::INFINITY);
                if d < *min {
                    *min = d;
                }
            }
        }

        // Arm collision proxies.
        let flags = self.chain.collision_flags(&q_next, &self.cfg.physics);
        self.events.self_collision |= flags.self_collision;
        self.events.table_collision |= flags.table;

        self.q = q_next;
        self.paddle_center = c1;
        self.paddle_normal = n1;
        self.step_index += 1;
        self.push_history();

        if self.terminated.is_none() {
            if !self.ball.live {
                self.terminated = Some(TerminationReason::BallDead);
            } else if self.ball.position.y < self.cfg.back_plane_y {
                self.terminated = Some(TerminationReason::BackPlane);
            } else if self.step_index >= self.cfg.max_steps {
                self.terminated = Some(TerminationReason::StepCap);
            }
        }
        if self.terminated.is_some() {
            self.ready = false;
        }
        Ok(StepOutcome {
            terminated: self.terminated,
        })
    }

    /// Landing-x prediction for the current (true) ball state.
    pub fn predict_landing_x(&self) -> Option<f64> {
        predict_landing_x(&self.ball, &self.cfg.physics)
    }
}

/// Contact requires the ball center within the threshold of the paddle plane
/// and its in-plane projection inside the disc radius.
pub(crate) fn contact_predicate(
    ball: &Vector3<f64>,
    paddle_center: &Vector3<f64>,
    paddle_normal: &Unit<Vector3<f64>>,
    threshold: f64,
    paddle_radius: f64,
) -> bool {
    let rel = ball - paddle_center;
    let axial = rel.dot(paddle_normal);
    if axial.abs() > threshold {
        return false;
    }
    let radial = (rel - paddle_normal.into_inner() * axial).norm();
    radial <= paddle_radius
}

/// Reflects the ball velocity relative to the paddle about the paddle normal,
/// scaling the normal component by the paddle restitution.
pub(crate) fn reflect_off_paddle(
    ball: &BallState,
    paddle_center: &Vector3<f64>,
    paddle_normal: &Unit<Vector3<f64>>,
    paddle_velocity: &Vector3<f64>,
    physics: &PhysicsParams,
) -> BallState {
    // Orient the normal toward the ball side so the reflection pushes out.
    let rel_pos = ball.position - paddle_center;
    let mut normal = paddle_normal.into_inner();
    if rel_pos.dot(&normal) < 0.0 {
        normal = -normal;
    }
    let rel_vel = ball.velocity - paddle_velocity;
    let normal_speed = rel_vel.dot(&normal);
    let mut out = *ball;
    if normal_speed < 0.0 {
        let reflected = rel_vel - (1.0 + physics.restitution_paddle) * normal_speed * normal;
        out.velocity = reflected + paddle_velocity;
    }
    out
}

/// Ball-paddle contact: when the ball sphere intersects the paddle disc
/// (within `contact_margin` of the plane, projection inside the disc), the
/// ball velocity is reflected off the moving paddle and returned with the
/// hit flag; otherwise `None`.
pub fn paddle_contact(
    ball: &BallState,
    paddle: &super::robot::PaddlePose,
    physics: &PhysicsParams,
    contact_margin: f64,
) -> Option<BallState> {
    let threshold = physics.ball_radius + contact_margin;
    if !contact_predicate(
        &ball.position,
        &paddle.center,
        &paddle.normal,
        threshold,
        physics.paddle_radius,
    ) {
        return None;
    }
    Some(reflect_off_paddle(
        ball,
        &paddle.center,
        &paddle.normal,
        &paddle.velocity,
        physics,
    ))
}
