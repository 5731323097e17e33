//! Episode rollouts: drive one environment with a controller, assemble the
//! episode record, and score it. Shared by ES training, the probe, and batch
//! evaluation.

use crate::error::Result;
use crate::es::{CandidateEval, EvalRequest, Evaluator};
use crate::policy::{
    forward, ActionFilter, ArchSpec, ButterworthCoeffs, NormSnapshot, PolicyScratch, RunningStats,
};
use crate::rewards::{total_reward, EpisodeRecord, RewardBreakdown, RewardConfig};
use crate::rng;
use crate::sim::{BallDistribution, Env, EnvConfig, ACTION_DIM};

/// Which parameters drive an episode.
#[derive(Debug, Clone, Copy)]
pub enum PolicySelector<'a> {
    Single(&'a [f64]),
    /// Rules-based bimodal baseline: the predicted landing x of the incoming
    /// throw picks the sub-policy at episode start (x >= 0 or no prediction:
    /// forehand), committed for the whole episode.
    Hierarchical {
        forehand: &'a [f64],
        backhand: &'a [f64],
    },
}

/// Reusable per-worker episode driver.
pub struct EpisodeRunner<'a> {
    pub arch: &'a ArchSpec,
    pub snapshot: &'a NormSnapshot,
    pub reward: &'a RewardConfig,
    pub filter: Option<ActionFilter>,
    scratch: PolicyScratch,
    velocity_limits: [f64; ACTION_DIM],
}

impl<'a> EpisodeRunner<'a> {
    pub fn new(
        env_cfg: &EnvConfig,
        arch: &'a ArchSpec,
        snapshot: &'a NormSnapshot,
        reward: &'a RewardConfig,
        filter_cutoff_hz: Option<f64>,
    ) -> Result<Self> {
        let filter = match filter_cutoff_hz {
            Some(hz) => Some(ActionFilter::new(ButterworthCoeffs::lowpass(
                hz,
                1.0 / env_cfg.control_dt,
            )?)),
            None => None,
        };
        Ok(EpisodeRunner {
            arch,
            snapshot,
            reward,
            filter,
            scratch: PolicyScratch::new(),
            velocity_limits: env_cfg.robot.velocity_limits(),
        })
    }

    /// Runs one episode and scores it. When `stats` is given, every
    /// `stats_subsample`-th observation row is pushed into it.
    pub fn run_episode(
        &mut self,
        env: &mut Env,
        selector: PolicySelector<'_>,
        dist: &BallDistribution,
        seed: u64,
        mut stats: Option<(&mut RunningStats, usize)>,
    ) -> Result<(EpisodeRecord, RewardBreakdown)> {
        env.reset(dist, seed)?;
        if let Some(filter) = &mut self.filter {
            filter.reset();
        }
        let theta = match selector {
            PolicySelector::Single(theta) => theta,
            PolicySelector::Hierarchical { forehand, backhand } => {
                match env.predict_landing_x() {
                    Some(x) if x < 0.0 => backhand,
                    _ => forehand,
                }
            }
        };

        let mut record = EpisodeRecord {
            dt: env.config().control_dt,
            joint_positions: vec![*env.joints()],
            paddle_heights: Vec::new(),
            ball_positions: vec![[
                env.ball().position.x,
                env.ball().position.y,
                env.ball().position.z,
            ]],
            events: *env.events(),
            throw: *env.throw(),
            termination: crate::sim::TerminationReason::StepCap,
        };

        loop {
            let obs = env.observe();
            let raw = forward(self.arch, theta, &obs, self.snapshot, &mut self.scratch)?;
            let mut command = [0.0; ACTION_DIM];
            for i in 0..ACTION_DIM {
                command[i] = raw[i] * self.velocity_limits[i];
            }
            if let Some(filter) = &mut self.filter {
                command = filter.apply(&command);
            }
            let outcome = env.step(&command)?;

            record.joint_positions.push(*env.joints());
            record.paddle_heights.push(env.paddle_center().z);
            record.ball_positions.push([
                env.ball().position.x,
                env.ball().position.y,
                env.ball().position.z,
            ]);
            if let Some((stats, every)) = &mut stats {
                if env.step_index() % *every == 0 {
                    stats.push(&env.latest_feature_row());
                }
            }
            if let Some(reason) = outcome.terminated {
                record.termination = reason;
                break;
            }
        }
        record.events = *env.events();
        let breakdown = total_reward(&record, self.reward);
        Ok((record, breakdown))
    }
}

/// ES evaluator backed by full environment rollouts.
pub struct RolloutEvaluator {
    pub env: EnvConfig,
    pub arch: ArchSpec,
    pub filter_cutoff_hz: Option<f64>,
    pub stats_subsample: usize,
}

impl RolloutEvaluator {
    pub fn new(
        env: EnvConfig,
        arch: ArchSpec,
        filter_cutoff_hz: Option<f64>,
        stats_subsample: usize,
    ) -> Result<Self> {
        env.validate()?;
        arch.validate()?;
        Ok(RolloutEvaluator {
            env,
            arch,
            filter_cutoff_hz,
            stats_subsample,
        })
    }
}

impl Evaluator for RolloutEvaluator {
    fn dim(&self) -> usize {
        self.arch.param_count()
    }

    fn evaluate(
        &self,
        theta: &[f64],
        snapshot: &NormSnapshot,
        request: &EvalRequest<'_>,
    ) -> Result<CandidateEval> {
        let mut env = Env::new(self.env.clone())?;
        let dist = BallDistribution {
            kind: request.stage.distribution,
            ..self.env.throw.clone()
        };
        let mut runner = EpisodeRunner::new(
            &self.env,
            &self.arch,
            snapshot,
            &request.stage.rewards,
            self.filter_cutoff_hz,
        )?;
        let mut stats = RunningStats::new();
        let mut total = 0.0;
        let mut hits = 0;
        let mut successes = 0;
        for rollout in 0..request.rollouts {
            let seed = rng::derive_seed(request.seed, &[rollout as u64]);
            let (record, breakdown) = runner.run_episode(
                &mut env,
                PolicySelector::Single(theta),
                &dist,
                seed,
                Some((&mut stats, self.stats_subsample)),
            )?;
            total += breakdown.total();
            hits += record.events.hit as u32;
            successes += record.events.success as u32;
        }
        Ok(CandidateEval {
            fitness: total / request.rollouts as f64,
            episodes: request.rollouts as u32,
            hits,
            successes,
            stats,
        })
    }
}
