//! Coordinator loop: snapshot statistics, fan rollouts out to workers,
//! aggregate fitnesses by perturbation index, apply the update, merge
//! statistics, advance the curriculum, and emit metrics and checkpoints.
//!
//! Workers are stateless: each job is `(theta +/- sigma g, seed, snapshot)`
//! and returns `(fitness, stats delta)`. Both sides of an antithetic pair
//! share episode seeds (common random numbers), which cancels throw-sampling
//! variance out of the pair difference. Aggregation is keyed by job index and
//! statistics merge in fixed index order on the coordinator, so the result is
//! bitwise independent of the worker count.

use crate::checkpoint::Checkpoint;
use crate::error::Result;
use crate::policy::{ArchSpec, NormSnapshot, RunningStats};
use crate::rewards::{advance_curriculum, Curriculum, CurriculumStage, CurriculumState};
use crate::rng;

use super::{es_update, sample_directions, EsConfig, PerturbationBatch, WorkerPool};

/// One fitness evaluation request.
pub struct EvalRequest<'a> {
    /// Seed for the episode stream of this evaluation.
    pub seed: u64,
    /// Episodes to average.
    pub rollouts: usize,
    pub stage: &'a CurriculumStage,
}

/// Result of evaluating one candidate parameter vector.
#[derive(Debug, Clone)]
pub struct CandidateEval {
    /// Mean total reward over the rollouts.
    pub fitness: f64,
    pub episodes: u32,
    pub hits: u32,
    pub successes: u32,
    /// Observation statistics gathered during the rollouts.
    pub stats: RunningStats,
}

impl CandidateEval {
    pub fn hit_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.hits as f64 / self.episodes as f64
        }
    }

    pub fn success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// A stateless fitness evaluator. Implementations must be thread-safe; the
/// trainer never mutates shared state from workers.
pub trait Evaluator: Sync {
    /// Parameter dimension.
    fn dim(&self) -> usize;
    fn evaluate(
        &self,
        theta: &[f64],
        snapshot: &NormSnapshot,
        request: &EvalRequest<'_>,
    ) -> Result<CandidateEval>;
}

/// One metrics row per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub mean_fitness: f64,
    pub max_fitness: f64,
    pub reward_std: f64,
    /// Success rate of the probe evaluation at the updated parameters.
    pub probe_success: f64,
    /// Hit rate of the probe evaluation.
    pub probe_hit: f64,
    pub stage_index: usize,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str =
        "iteration,mean_fitness,max_fitness,reward_std,probe_success,probe_hit,stage";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.iteration,
            self.mean_fitness,
            self.max_fitness,
            self.reward_std,
            self.probe_success,
            self.probe_hit,
            self.stage_index
        )
    }
}

/// Receives training output; implemented by the CLI (files) and tests
/// (in-memory buffers).
pub trait TrainSink {
    fn on_metrics(&mut self, row: &MetricsRow) -> Result<()>;
    fn on_checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()>;
    /// Polled once per iteration; true requests a clean early stop.
    fn interrupted(&self) -> bool {
        false
    }
}

/// In-memory sink collecting everything.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub metrics: Vec<MetricsRow>,
    pub checkpoints: Vec<Checkpoint>,
}

impl TrainSink for MemorySink {
    fn on_metrics(&mut self, row: &MetricsRow) -> Result<()> {
        self.metrics.push(row.clone());
        Ok(())
    }

    fn on_checkpoint(&mut self, checkpoint: &Checkpoint) -> Result<()> {
        self.checkpoints.push(checkpoint.clone());
        Ok(())
    }
}

/// How a training run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainOutcome {
    Completed,
    Interrupted,
}

/// Runs the optimizer loop. `resume` continues from a checkpoint produced by
/// an identical configuration; iteration numbering carries on seamlessly
/// because every random stream is keyed by `(seed, iteration)`.
pub fn train<E: Evaluator, S: TrainSink>(
    cfg: &EsConfig,
    arch: &ArchSpec,
    evaluator: &E,
    curriculum: &Curriculum,
    pool: &WorkerPool,
    resume: Option<Checkpoint>,
    sink: &mut S,
) -> Result<(Checkpoint, TrainOutcome)> {
    cfg.validate()?;
    curriculum.validate()?;
    let dim = evaluator.dim();

    let start = match resume {
        Some(ckpt) => ckpt,
        None => Checkpoint::initial(arch),
    };
    if start.theta.len() != dim {
        return Err(crate::error::Error::CheckpointMismatch(format!(
            "resume parameters have {} entries, evaluator needs {dim}",
            start.theta.len()
        )));
    }
    let mut theta = start.theta.clone();
    let mut stats = start.stats.clone();
    let mut curriculum_state = CurriculumState {
        stage_index: start.stage_index,
        entered_iteration: start.stage_entered,
    };
    let mut outcome = TrainOutcome::Completed;

    let make_checkpoint = |iteration: u64,
                           theta: &[f64],
                           stats: &RunningStats,
                           state: CurriculumState| Checkpoint {
        version: crate::checkpoint::CHECKPOINT_VERSION,
        iteration,
        arch: arch.clone(),
        theta: theta.to_vec(),
        stats: stats.clone(),
        stage_index: state.stage_index,
        stage_entered: state.entered_iteration,
    };

    let mut completed = start.iteration;
    let mut last_checkpointed: Option<u64> = None;
    for iteration in start.iteration..cfg.iterations {
        if sink.interrupted() {
            outcome = TrainOutcome::Interrupted;
            break;
        }
        let stage = curriculum.stage(curriculum_state.stage_index);
        let snapshot = stats.snapshot();

        let mut dir_rng = rng::rng_for(cfg.seed, &[rng::stream::DIRECTIONS, iteration]);
        let directions = sample_directions(cfg.pairs, dim, &mut dir_rng);

        // 2n candidate evaluations: job 2i is +g_i, job 2i+1 is -g_i. The
        // pair shares its episode seed.
        let results: Vec<Result<CandidateEval>> = pool.map_indexed(2 * cfg.pairs, |job| {
            let pair = job / 2;
            let sign = if job % 2 == 0 { 1.0 } else { -1.0 };
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&directions[pair])
                .map(|(t, g)| t + sign * cfg.noise_std * g)
                .collect();
            let request = EvalRequest {
                seed: rng::derive_seed(cfg.seed, &[rng::stream::ROLLOUT, iteration, pair as u64]),
                rollouts: cfg.rollouts_per_candidate,
                stage,
            };
            evaluator.evaluate(&candidate, &snapshot, &request)
        });

        let mut evals = Vec::with_capacity(2 * cfg.pairs);
        for result in results {
            evals.push(result?);
        }
        let mut fitness_plus = Vec::with_capacity(cfg.pairs);
        let mut fitness_minus = Vec::with_capacity(cfg.pairs);
        for pair in 0..cfg.pairs {
            fitness_plus.push(evals[2 * pair].fitness);
            fitness_minus.push(evals[2 * pair + 1].fitness);
        }

        let batch = PerturbationBatch {
            directions,
            fitness_plus,
            fitness_minus,
        };
        let (next_theta, info) = es_update(&theta, &batch, cfg);
        theta = next_theta;

        // Merge observation statistics in fixed job order.
        for eval in &evals {
            stats.merge(&eval.stats);
        }

        // Probe the updated parameters for the metrics row and curriculum.
        let (probe_success, probe_hit) = if cfg.probe_episodes > 0 {
            let request = EvalRequest {
                seed: rng::derive_seed(cfg.seed, &[rng::stream::PROBE, iteration]),
                rollouts: cfg.probe_episodes,
                stage,
            };
            let probe = evaluator.evaluate(&theta, &stats.snapshot(), &request)?;
            (probe.success_rate(), probe.hit_rate())
        } else {
            (0.0, 0.0)
        };

        let mean_fitness = batch
            .fitness_plus
            .iter()
            .chain(batch.fitness_minus.iter())
            .sum::<f64>()
            / (2.0 * cfg.pairs as f64);
        let max_fitness = batch
            .fitness_plus
            .iter()
            .chain(batch.fitness_minus.iter())
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        sink.on_metrics(&MetricsRow {
            iteration,
            mean_fitness,
            max_fitness,
            reward_std: info.reward_std,
            probe_success,
            probe_hit,
            stage_index: curriculum_state.stage_index,
        })?;

        curriculum_state = advance_curriculum(curriculum, curriculum_state, iteration, probe_success);
        completed = iteration + 1;

        if cfg.checkpoint_every > 0 && completed % cfg.checkpoint_every == 0 {
            sink.on_checkpoint(&make_checkpoint(completed, &theta, &stats, curriculum_state))?;
            last_checkpointed = Some(completed);
        }
    }

    let final_ckpt = make_checkpoint(completed, &theta, &stats, curriculum_state);
    if last_checkpointed != Some(completed) {
        sink.on_checkpoint(&final_ckpt)?;
    }
    Ok((final_ckpt, outcome))
}
