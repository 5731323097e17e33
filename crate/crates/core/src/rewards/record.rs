//! Per-episode trajectory record consumed by the reward engine and the
//! evaluation metrics. Velocities, accelerations, and jerks are finite
//! differences of the stored joint positions on the control grid, so the
//! derivative chains are consistent by construction.

use serde::{Deserialize, Serialize};

use crate::sim::{EpisodeEvents, TerminationReason, ThrowSpec};

pub const DOF: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Control period, seconds.
    pub dt: f64,
    /// Joint positions: row 0 is the reset pose, then one row per step.
    pub joint_positions: Vec<[f64; DOF]>,
    /// Paddle center height after each step (one per step).
    pub paddle_heights: Vec<f64>,
    /// Ball position after each step, including post-contact flight.
    pub ball_positions: Vec<[f64; 3]>,
    pub events: EpisodeEvents,
    pub throw: ThrowSpec,
    pub termination: TerminationReason,
}

impl EpisodeRecord {
    /// Number of executed control steps.
    pub fn steps(&self) -> usize {
        self.joint_positions.len().saturating_sub(1)
    }

    /// Landing x of the incoming throw (the sampled target).
    pub fn landing_x(&self) -> f64 {
        self.throw.target.x
    }

    /// Joint velocities, one row between consecutive position rows.
    pub fn velocities(&self) -> Vec<[f64; DOF]> {
        difference_rows(&self.joint_positions, self.dt)
    }

    pub fn accelerations(&self) -> Vec<[f64; DOF]> {
        difference_rows(&self.velocities(), self.dt)
    }

    pub fn jerks(&self) -> Vec<[f64; DOF]> {
        difference_rows(&self.accelerations(), self.dt)
    }

    /// Index of the last pre-contact pose row: poses up to the start of the
    /// contact step, or every row when the episode has no contact.
    pub fn pre_contact_end(&self) -> usize {
        match self.events.contact_step {
            Some(step) => step.min(self.joint_positions.len() - 1),
            None => self.joint_positions.len() - 1,
        }
    }
}

fn difference_rows(rows: &[[f64; DOF]], dt: f64) -> Vec<[f64; DOF]> {
    rows.windows(2)
        .map(|pair| {
            let mut out = [0.0; DOF];
            for i in 0..DOF {
                out[i] = (pair[1][i] - pair[0][i]) / dt;
            }
            out
        })
        .collect()
}
