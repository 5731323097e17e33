//! Ballistic ball model: gravity-only flight, table bounce with restitution,
//! net contact, and the closed-form landing predictor.
//!
//! Flight between events is integrated with the exact constant-acceleration
//! update, so kinetic + potential energy is conserved to rounding between
//! contacts and event times inside a step are roots of a quadratic rather
//! than bisection artifacts.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Physical constants of the table, ball, and play volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsParams {
    /// Gravitational acceleration, m/s^2 (acts along -z).
    pub gravity: f64,
    /// Table length along y, meters.
    pub table_length: f64,
    /// Table width along x, meters.
    pub table_width: f64,
    /// Net height above the table top, meters.
    pub net_height: f64,
    /// Floor plane, meters (table top is z = 0).
    pub floor_z: f64,
    /// Ball radius, meters.
    pub ball_radius: f64,
    /// Paddle disc radius, meters.
    pub paddle_radius: f64,
    /// Restitution of the ball-table bounce.
    pub restitution_table: f64,
    /// Restitution of the ball-paddle contact.
    pub restitution_paddle: f64,
    /// Balls whose |x| exceeds this leave play.
    pub bound_x: f64,
    /// Balls whose |y| exceeds this leave play.
    pub bound_y: f64,
    /// Balls above this height leave play.
    pub bound_z: f64,
    /// Post-bounce vertical speed below which the ball is ruled down.
    pub min_bounce_speed: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        PhysicsParams {
            gravity: 9.81,
            table_length: 2.74,
            table_width: 1.525,
            net_height: 0.1525,
            floor_z: -0.76,
            ball_radius: 0.02,
            paddle_radius: 0.085,
            restitution_table: 0.87,
            restitution_paddle: 0.75,
            bound_x: 3.0,
            bound_y: 4.0,
            bound_z: 4.0,
            min_bounce_speed: 0.05,
        }
    }
}

impl PhysicsParams {
    pub fn half_length(&self) -> f64 {
        self.table_length / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.table_width / 2.0
    }

    /// Whether a point at table height lies over the table surface.
    pub fn on_table(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_width() && y.abs() <= self.half_length()
    }

    /// Distance from a point to the opponent half of the table surface
    /// (the rectangle x in [-w/2, w/2], y in [0, l/2] at z = 0).
    pub fn distance_to_opponent_half(&self, p: &Vector3<f64>) -> f64 {
        let cx = p.x.clamp(-self.half_width(), self.half_width());
        let cy = p.y.clamp(0.0, self.half_length());
        let dx = p.x - cx;
        let dy = p.y - cy;
        (dx * dx + dy * dy + p.z * p.z).sqrt()
    }
}

/// Ball kinematic state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// False once the ball leaves play (floor, net, out of bounds).
    pub live: bool,
}

impl BallState {
    pub fn new(position: Vector3<f64>, velocity: Vector3<f64>) -> Self {
        BallState {
            position,
            velocity,
            live: true,
        }
    }

    /// Exact constant-acceleration advance by `t` seconds (no event checks).
    pub fn coast(&self, t: f64, gravity: f64) -> BallState {
        let accel = Vector3::new(0.0, 0.0, -gravity);
        BallState {
            position: self.position + self.velocity * t + accel * (0.5 * t * t),
            velocity: self.velocity + accel * t,
            live: self.live,
        }
    }
}

/// What happened to the ball during one `step_ball` call.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FlightEvent {
    /// Table bounce location, if the ball bounced this step.
    pub bounce: Option<Vector3<f64>>,
    /// Ball struck the net band this step.
    pub net_hit: bool,
    /// Ball reached the floor this step.
    pub floor: bool,
    /// Ball left the play volume this step.
    pub out_of_bounds: bool,
}

/// Time of the next descending crossing of the plane `z = plane` under
/// gravity, starting from height `z` with vertical speed `vz`. Returns `None`
/// when the trajectory never reaches the plane.
fn descending_crossing(z: f64, vz: f64, gravity: f64, plane: f64) -> Option<f64> {
    let disc = vz * vz + 2.0 * gravity * (z - plane);
    if disc < 0.0 {
        return None;
    }
    let t = (vz + disc.sqrt()) / gravity;
    (t > 1e-12).then_some(t)
}

/// Advances the ball by `dt` under gravity, handling table bounce, net
/// contact, floor, and out-of-bounds. Total function: a dead ball is
/// returned unchanged.
pub fn step_ball(ball: &BallState, dt: f64, p: &PhysicsParams) -> (BallState, FlightEvent) {
    debug_assert!(dt > 0.0);
    let mut events = FlightEvent::default();
    if !ball.live {
        return (*ball, events);
    }

    let mut state = *ball;
    let mut remaining = dt;
    // Bounce cascade is bounded: restitution < 1 and the rolling cutoff below.
    for _ in 0..16 {
        // Candidate events inside the remaining window, earliest first.
        let mut t_event = remaining;
        #[derive(Clone, Copy, PartialEq)]
        enum Kind {
            None,
            Table,
            Net,
            Floor,
        }
        let mut kind = Kind::None;

        if let Some(t) = descending_crossing(state.position.z, state.velocity.z, p.gravity, 0.0) {
            if t <= t_event {
                let at = state.coast(t, p.gravity);
                if p.on_table(at.position.x, at.position.y) {
                    t_event = t;
                    kind = Kind::Table;
                }
            }
        }
        if let Some(t) = descending_crossing(
            state.position.z,
            state.velocity.z,
            p.gravity,
            p.floor_z,
        ) {
            if t <= t_event {
                t_event = t;
                kind = Kind::Floor;
            }
        }
        // Net band: crossing the y = 0 plane below net height, either direction.
        if state.velocity.y.abs() > 1e-12 {
            let t = -state.position.y / state.velocity.y;
            if t > 1e-12 && t <= t_event {
                let at = state.coast(t, p.gravity);
                if at.position.z <= p.net_height && at.position.z >= 0.0
                    && at.position.x.abs() <= p.half_width()
                {
                    t_event = t;
                    kind = Kind::Net;
                }
            }
        }

        match kind {
            Kind::None => {
                state = state.coast(remaining, p.gravity);
                break;
            }
            Kind::Table => {
                state = state.coast(t_event, p.gravity);
                events.bounce = Some(state.position);
                state.velocity.z = -p.restitution_table * state.velocity.z;
                if state.velocity.z < p.min_bounce_speed {
                    // Rolling: the ball is down for play purposes.
                    state.live = false;
                    break;
                }
                remaining -= t_event;
                if remaining <= 1e-12 {
                    break;
                }
            }
            Kind::Net => {
                state = state.coast(t_event, p.gravity);
                events.net_hit = true;
                state.live = false;
                break;
            }
            Kind::Floor => {
                state = state.coast(t_event, p.gravity);
                events.floor = true;
                state.live = false;
                break;
            }
        }
    }

    if state.live
        && (state.position.x.abs() > p.bound_x
            || state.position.y.abs() > p.bound_y
            || state.position.z > p.bound_z
            || state.position.z < p.floor_z - 1e-9)
    {
        events.out_of_bounds = true;
        state.live = false;
    }

    (state, events)
}

/// Gravity-only advance with table bounce disabled; used by the throw
/// round-trip checks. Reports the first descending table-height crossing.
pub fn step_ball_no_bounce(ball: &BallState, dt: f64, gravity: f64) -> BallState {
    ball.coast(dt, gravity)
}

/// Closed-form prediction of where the ball next crosses table height
/// (`z = 0`) on the robot side (`y <= 0`), simulating through at most one
/// table bounce. Returns `None` when the trajectory never produces a
/// robot-side crossing.
pub fn predict_landing(ball: &BallState, p: &PhysicsParams) -> Option<Vector3<f64>> {
    if !ball.live {
        return None;
    }
    let mut state = *ball;
    for bounce in 0..2 {
        let t = descending_crossing(state.position.z, state.velocity.z, p.gravity, 0.0)?;
        let at = state.coast(t, p.gravity);
        if at.position.y <= 0.0 {
            return Some(at.position);
        }
        // Crossing on the opponent side: only a bounce over the table can
        // send the ball onward to a robot-side crossing.
        if !p.on_table(at.position.x, at.position.y) || bounce == 1 {
            return None;
        }
        state = at;
        state.velocity.z = -p.restitution_table * state.velocity.z;
    }
    None
}

/// x-coordinate of the predicted robot-side landing, if any.
pub fn predict_landing_x(ball: &BallState, p: &PhysicsParams) -> Option<f64> {
    predict_landing(ball, p).map(|point| point.x)
}
