//! Batch policy evaluation: success/hit rates with forehand/backhand
//! breakdowns, smoothness metrics, and CSV/JSON report emission.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::es::WorkerPool;
use crate::policy::{ArchSpec, RunningStats};
use crate::rewards::{EpisodeRecord, RewardConfig};
use crate::rollout::{EpisodeRunner, PolicySelector};
use crate::rng;
use crate::sim::{BallDistribution, Env, EnvConfig, Side};

/// How the per-episode smoothness statistics aggregate over time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessMode {
    /// Per joint, the max of |derivative| over time; averaged over joints.
    MaxPerJoint,
    /// Mean of |derivative| over all time steps and joints.
    MeanOverAll,
}

impl Default for SmoothnessMode {
    fn default() -> Self {
        SmoothnessMode::MaxPerJoint
    }
}

/// Episode smoothness summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothness {
    pub jerk: f64,
    pub acceleration: f64,
    pub velocity: f64,
    /// Sum over joints of the traversed position range.
    pub joint_range: f64,
}

/// Smoothness metrics from the finite-difference chains of one episode.
/// Requires at least 3 executed steps (otherwise jerk is undefined).
pub fn smoothness_metrics(rec: &EpisodeRecord, mode: SmoothnessMode) -> Result<Smoothness> {
    if rec.steps() < 3 {
        return Err(Error::EpisodeTooShort { steps: rec.steps() });
    }
    let velocity = aggregate(&rec.velocities(), mode);
    let acceleration = aggregate(&rec.accelerations(), mode);
    let jerk = aggregate(&rec.jerks(), mode);

    let dof = rec.joint_positions[0].len();
    let mut joint_range = 0.0;
    for j in 0..dof {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &rec.joint_positions {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        joint_range += hi - lo;
    }
    Ok(Smoothness {
        jerk,
        acceleration,
        velocity,
        joint_range,
    })
}

fn aggregate(rows: &[[f64; 8]], mode: SmoothnessMode) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    match mode {
        SmoothnessMode::MaxPerJoint => {
            let mut acc = 0.0;
            for j in 0..8 {
                let mut max = 0.0_f64;
                for row in rows {
                    max = max.max(row[j].abs());
                }
                acc += max;
            }
            acc / 8.0
        }
        SmoothnessMode::MeanOverAll => {
            let total: f64 = rows.iter().flat_map(|r| r.iter()).map(|v| v.abs()).sum();
            total / (rows.len() * 8) as f64
        }
    }
}

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub index: usize,
    pub side: Side,
    pub hit: bool,
    pub success: bool,
    pub reward: f64,
    pub jerk: f64,
    pub acceleration: f64,
    pub velocity: f64,
    pub joint_range: f64,
    /// Full event log for drill-down.
    pub events: crate::sim::EpisodeEvents,
    pub termination: crate::sim::TerminationReason,
}

/// Aggregated evaluation report. Rates are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub success_rate: f64,
    pub hit_rate: f64,
    pub success_forehand: f64,
    pub hit_forehand: f64,
    pub success_backhand: f64,
    pub hit_backhand: f64,
    pub jerk: f64,
    pub acceleration: f64,
    pub velocity: f64,
    pub joint_range: f64,
    pub rows: Vec<EpisodeRow>,
}

impl EvalReport {
    /// Summary line matching the report table columns.
    pub fn csv_header() -> &'static str {
        "episodes,S,H,S-F,H-F,S-B,H-B,J,A,V,JR"
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.episodes,
            self.success_rate,
            self.hit_rate,
            self.success_forehand,
            self.hit_forehand,
            self.success_backhand,
            self.hit_backhand,
            self.jerk,
            self.acceleration,
            self.velocity,
            self.joint_range
        )
    }

    pub fn episode_csv(&self) -> String {
        let mut out = String::from("index,side,hit,success,reward,J,A,V,JR\n");
        for row in &self.rows {
            let side = match row.side {
                Side::Forehand => "forehand",
                Side::Backhand => "backhand",
                Side::Center => "center",
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                row.index,
                side,
                row.hit as u8,
                row.success as u8,
                row.reward,
                row.jerk,
                row.acceleration,
                row.velocity,
                row.joint_range
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Line-delimited episode event log (one JSON record per episode).
    pub fn event_log(&self) -> Result<String> {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Everything needed to evaluate one policy bundle.
pub struct EvalContext<'a> {
    pub env: &'a EnvConfig,
    pub distribution: &'a BallDistribution,
    pub arch: &'a ArchSpec,
    pub policy: PolicySelector<'a>,
    pub stats: &'a RunningStats,
    pub rewards: &'a RewardConfig,
    pub filter_cutoff_hz: Option<f64>,
    pub smoothness: SmoothnessMode,
}

/// Runs `episodes` independent episodes and aggregates the report.
/// Deterministic per seed; episode seeds are keyed by index, so the
/// aggregation never depends on worker scheduling.
pub fn evaluate_policy(
    ctx: &EvalContext<'_>,
    episodes: usize,
    seed: u64,
    pool: &WorkerPool,
) -> Result<EvalReport> {
    ctx.env.validate()?;
    ctx.arch.validate()?;
    let snapshot = ctx.stats.snapshot();

    let results: Vec<Result<EpisodeRow>> = pool.map_indexed(episodes, |index| {
        let mut env = Env::new(ctx.env.clone())?;
        let mut runner = EpisodeRunner::new(
            ctx.env,
            ctx.arch,
            &snapshot,
            ctx.rewards,
            ctx.filter_cutoff_hz,
        )?;
        let episode_seed = rng::derive_seed(seed, &[rng::stream::EVAL, index as u64]);
        let (record, breakdown) =
            runner.run_episode(&mut env, ctx.policy, ctx.distribution, episode_seed, None)?;
        let smooth = smoothness_metrics(&record, ctx.smoothness)?;
        Ok(EpisodeRow {
            index,
            side: record.throw.side,
            hit: record.events.hit,
            success: record.events.success,
            reward: breakdown.total(),
            jerk: smooth.jerk,
            acceleration: smooth.acceleration,
            velocity: smooth.velocity,
            joint_range: smooth.joint_range,
            events: record.events,
            termination: record.termination,
        })
    });

    let mut rows = Vec::with_capacity(episodes);
    for result in results {
        rows.push(result?);
    }
    Ok(aggregate_rows(rows))
}

fn aggregate_rows(rows: Vec<EpisodeRow>) -> EvalReport {
    let episodes = rows.len();
    let pct = |count: usize, total: usize| {
        if total == 0 {
            0.0
        } else {
            100.0 * count as f64 / total as f64
        }
    };
    let mut hits = 0;
    let mut successes = 0;
    // Center-labeled throws count toward the forehand bucket (tie rule).
    let mut forehand = (0_usize, 0_usize, 0_usize); // (episodes, hits, successes)
    let mut backhand = (0_usize, 0_usize, 0_usize);
    let mut jerk = 0.0;
    let mut acceleration = 0.0;
    let mut velocity = 0.0;
    let mut joint_range = 0.0;
    for row in &rows {
        hits += row.hit as usize;
        successes += row.success as usize;
        let bucket = match row.side {
            Side::Backhand => &mut backhand,
            Side::Forehand | Side::Center => &mut forehand,
        };
        bucket.0 += 1;
        bucket.1 += row.hit as usize;
        bucket.2 += row.success as usize;
        jerk += row.jerk;
        acceleration += row.acceleration;
        velocity += row.velocity;
        joint_range += row.joint_range;
    }
    let n = episodes.max(1) as f64;
    EvalReport {
        episodes,
        success_rate: pct(successes, episodes),
        hit_rate: pct(hits, episodes),
        success_forehand: pct(forehand.2, forehand.0),
        hit_forehand: pct(forehand.1, forehand.0),
        success_backhand: pct(backhand.2, backhand.0),
        hit_backhand: pct(backhand.1, backhand.0),
        jerk: jerk / n,
        acceleration: acceleration / n,
        velocity: velocity / n,
        joint_range: joint_range / n,
        rows,
    }
}
