//! Throw generation: the closed-form launch-velocity solver and the
//! rejection sampler over configurable start/target distributions.

use nalgebra::{Vector2, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ball::PhysicsParams;
use crate::error::{Error, Result};

/// Which half of the table the throw lands on, by the sign of the landing x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Forehand,
    Backhand,
    Center,
}

impl Side {
    pub fn from_landing_x(x: f64) -> Side {
        if x > 0.0 {
            Side::Forehand
        } else if x < 0.0 {
            Side::Backhand
        } else {
            Side::Center
        }
    }
}

/// One sampled ball launch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrowSpec {
    /// Launch position (opponent side, above the table).
    pub start: Vector3<f64>,
    /// Solved launch velocity.
    pub velocity: Vector3<f64>,
    /// Intended landing point on the robot side, at table height.
    pub target: Vector2<f64>,
    /// Side label derived from the landing x (ties labeled center).
    pub side: Side,
}

/// Landing-x sampling mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionKind {
    /// Landing x in the forehand band.
    Forehand,
    /// Landing x over the full table width.
    FullTable,
    /// Landing |x| in `[inner, outer]`, both sides with equal mass.
    BallRange { inner: f64, outer: f64 },
}

/// Sampling bounds for throws. The landing-x band comes from `kind`; the
/// remaining bounds are shared by every distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallDistribution {
    pub kind: DistributionKind,
    /// Launch x range, meters.
    pub x0: [f64; 2],
    /// Launch y range, meters (opponent side).
    pub y0: [f64; 2],
    /// Launch height range above the table, meters.
    pub z0: [f64; 2],
    /// Launch vertical speed range, m/s.
    pub vz: [f64; 2],
    /// Landing y range, meters (robot side).
    pub y1: [f64; 2],
    /// Landing x band for the forehand distribution.
    pub x1_forehand: [f64; 2],
    /// Landing x band for the full-table distribution.
    pub x1_full: [f64; 2],
    /// Accepted launch vy band, m/s.
    pub vy_band: [f64; 2],
}

impl Default for BallDistribution {
    fn default() -> Self {
        BallDistribution {
            kind: DistributionKind::Forehand,
            x0: [-0.7, 0.7],
            y0: [1.6, 2.0],
            z0: [0.3, 0.6],
            vz: [1.2, 2.5],
            y1: [-1.2, -0.4],
            x1_forehand: [-0.2, 0.7],
            x1_full: [-0.7, 0.7],
            vy_band: [-8.5, -3.5],
        }
    }
}

impl BallDistribution {
    pub fn with_kind(kind: DistributionKind) -> Self {
        BallDistribution {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = |r: [f64; 2]| r[0] <= r[1];
        for (name, range) in [
            ("x0", self.x0),
            ("y0", self.y0),
            ("z0", self.z0),
            ("vz", self.vz),
            ("y1", self.y1),
            ("x1_forehand", self.x1_forehand),
            ("x1_full", self.x1_full),
            ("vy_band", self.vy_band),
        ] {
            if !ordered(range) || !range[0].is_finite() || !range[1].is_finite() {
                return Err(Error::Config(format!(
                    "throw bound {name} must be a finite ordered range, got {range:?}"
                )));
            }
        }
        if self.z0[0] <= 0.0 {
            return Err(Error::Config("throw z0 must stay above the table".into()));
        }
        if self.y1[1] > 0.0 {
            return Err(Error::Config("landing y1 must be on the robot side".into()));
        }
        if let DistributionKind::BallRange { inner, outer } = self.kind {
            if !(0.0 <= inner && inner < outer) {
                return Err(Error::Config(format!(
                    "ball range requires 0 <= inner < outer, got ({inner}, {outer})"
                )));
            }
        }
        Ok(())
    }

    fn sample_landing_x<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistributionKind::Forehand => rng.gen_range(self.x1_forehand[0]..=self.x1_forehand[1]),
            DistributionKind::FullTable => rng.gen_range(self.x1_full[0]..=self.x1_full[1]),
            DistributionKind::BallRange { inner, outer } => {
                let magnitude = rng.gen_range(inner..=outer);
                if rng.gen_bool(0.5) {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }
}

/// Solves the launch velocity that carries a projectile from `start` to
/// `(target.x, target.y, 0)` given the vertical launch speed `vz`, picking
/// the positive (descending-at-impact) flight-time root.
pub fn solve_throw(
    start: &Vector3<f64>,
    target: &Vector2<f64>,
    vz: f64,
    gravity: f64,
) -> Result<Vector3<f64>> {
    let disc = vz * vz + 2.0 * gravity * start.z;
    if disc < 0.0 {
        return Err(Error::UnsolvableThrow { z0: start.z, vz });
    }
    let flight = (vz + disc.sqrt()) / gravity;
    if flight <= 0.0 {
        return Err(Error::UnsolvableThrow { z0: start.z, vz });
    }
    Ok(Vector3::new(
        (target.x - start.x) / flight,
        (target.y - start.y) / flight,
        vz,
    ))
}

const MAX_SAMPLE_ATTEMPTS: usize = 10_000;

/// Rejection-samples a throw: draws start/target/vz from the distribution,
/// solves the launch velocity, and accepts when vy falls in the band and the
/// flight clears the net. Deterministic given the rng state.
pub fn sample_throw<R: Rng>(
    dist: &BallDistribution,
    physics: &PhysicsParams,
    rng: &mut R,
) -> Result<ThrowSpec> {
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let start = Vector3::new(
            rng.gen_range(dist.x0[0]..=dist.x0[1]),
            rng.gen_range(dist.y0[0]..=dist.y0[1]),
            rng.gen_range(dist.z0[0]..=dist.z0[1]),
        );
        let target = Vector2::new(
            dist.sample_landing_x(rng),
            rng.gen_range(dist.y1[0]..=dist.y1[1]),
        );
        let vz = rng.gen_range(dist.vz[0]..=dist.vz[1]);
        let velocity = match solve_throw(&start, &target, vz, physics.gravity) {
            Ok(v) => v,
            Err(_) => continue,
        };
        if velocity.y < dist.vy_band[0] || velocity.y > dist.vy_band[1] {
            continue;
        }
        if !clears_net(&start, &velocity, physics) {
            continue;
        }
        return Ok(ThrowSpec {
            start,
            velocity,
            target,
            side: Side::from_landing_x(target.x),
        });
    }
    Err(Error::ThrowSampling {
        attempts: MAX_SAMPLE_ATTEMPTS,
    })
}

/// Height margin over the net at the y = 0 crossing.
fn clears_net(start: &Vector3<f64>, velocity: &Vector3<f64>, p: &PhysicsParams) -> bool {
    if velocity.y.abs() < 1e-12 {
        return false;
    }
    let t = -start.y / velocity.y;
    if t <= 0.0 {
        return false;
    }
    let z = start.z + velocity.z * t - 0.5 * p.gravity * t * t;
    z > p.net_height + p.ball_radius
}
