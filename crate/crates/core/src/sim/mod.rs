//! Deterministic table-tennis simulation.
//!
//! Coordinate frame: origin at the table center, `x` across the table width,
//! `y` along its length, `z` up. The table top is the plane `z = 0`; the robot
//! plays the `y < 0` half and throws arrive with negative `y` velocity.

mod ball;
mod env;
mod robot;
mod throw;

pub use ball::{
    predict_landing, predict_landing_x, step_ball, step_ball_no_bounce, BallState, FlightEvent,
    PhysicsParams,
};
pub use env::{
    paddle_contact, Env, EnvConfig, EpisodeEvents, InitPose, NoiseDelayParams, Observation,
    StepOutcome, TerminationReason, ACTION_DIM, OBS_FEATURES, OBS_HISTORY,
};
pub use robot::{Joint, JointKind, KinematicChain, PaddlePose, RobotModel, DOF};
pub use throw::{sample_throw, solve_throw, BallDistribution, DistributionKind, Side, ThrowSpec};
