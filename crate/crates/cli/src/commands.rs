//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use rally_core::checkpoint::Checkpoint;
use rally_core::config::{Mode, RunConfig};
use rally_core::es::{train, EvalRequest, Evaluator, MetricsRow, TrainOutcome, TrainSink, WorkerPool};
use rally_core::eval::{evaluate_policy, EvalContext};
use rally_core::rollout::{PolicySelector, RolloutEvaluator};
use rally_core::rng;

use crate::{BenchArgs, CliError, Completion, EvalArgs, TrainArgs};

type CliResult<T> = Result<T, CliError>;

static INTERRUPTED: AtomicBool = AtomicBool::new(false);

extern "C" fn on_sigint(_: libc::c_int) {
    INTERRUPTED.store(true, Ordering::SeqCst);
}

fn install_sigint_handler() {
    unsafe {
        libc::signal(libc::SIGINT, on_sigint as *const () as libc::sighandler_t);
    }
}

/// Flag > RALLY_OUT_DIR > config > ./rally-out.
fn resolve_out_dir(flag: &Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    if let Some(dir) = flag {
        return dir.clone();
    }
    if let Ok(dir) = std::env::var("RALLY_OUT_DIR") {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    cfg.out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from("rally-out"))
}

fn load_config(path: &Path, expected_mode: Mode, args: &crate::CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(mode) = cfg.mode {
        if mode != expected_mode {
            return Err(CliError::Config(format!(
                "config mode {mode:?} does not match the subcommand"
            )));
        }
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.es.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Training sink writing `metrics.csv` and numbered checkpoints.
struct FileSink {
    out_dir: PathBuf,
    metrics: fs::File,
}

impl FileSink {
    fn new(out_dir: &Path, resuming: bool) -> CliResult<Self> {
        fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;
        let path = out_dir.join("metrics.csv");
        let fresh = !resuming || !path.exists();
        let mut metrics = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        if fresh && metrics.metadata().map(|m| m.len() == 0).unwrap_or(true) {
            writeln!(metrics, "{}", MetricsRow::CSV_HEADER)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        Ok(FileSink {
            out_dir: out_dir.to_path_buf(),
            metrics,
        })
    }

    fn latest_path(out_dir: &Path) -> PathBuf {
        out_dir.join("checkpoint-latest.json")
    }
}

impl TrainSink for FileSink {
    fn on_metrics(&mut self, row: &MetricsRow) -> rally_core::Result<()> {
        writeln!(self.metrics, "{}", row.to_csv())?;
        Ok(())
    }

    fn on_checkpoint(&mut self, checkpoint: &Checkpoint) -> rally_core::Result<()> {
        let name = format!("checkpoint-{:06}.json", checkpoint.iteration);
        checkpoint.save(&self.out_dir.join(name))?;
        checkpoint.save(&Self::latest_path(&self.out_dir))?;
        Ok(())
    }

    fn interrupted(&self) -> bool {
        INTERRUPTED.load(Ordering::SeqCst)
    }
}

pub fn run_train(args: TrainArgs) -> CliResult<Completion> {
    let cfg = load_config(&args.common.config, Mode::Train, &args.common)?;
    let out_dir = resolve_out_dir(&args.common.out, &cfg);

    let resume = match &args.resume {
        None => None,
        Some(Some(path)) => Some(Checkpoint::load(path)?),
        Some(None) => {
            let latest = FileSink::latest_path(&out_dir);
            if !latest.exists() {
                return Err(CliError::Config(format!(
                    "no checkpoint to resume from at {}",
                    latest.display()
                )));
            }
            Some(Checkpoint::load(&latest)?)
        }
    };

    let mut es_cfg = cfg.es.clone();
    es_cfg.seed = cfg.effective_seed();
    let curriculum = cfg.effective_curriculum();
    let evaluator = RolloutEvaluator::new(
        cfg.env.clone(),
        cfg.policy.arch.clone(),
        cfg.policy.action_filter_hz,
        es_cfg.stats_subsample,
    )?;
    let pool = WorkerPool::new(cfg.workers)?;
    install_sigint_handler();
    let mut sink = FileSink::new(&out_dir, resume.is_some())?;

    let start = Instant::now();
    let (ckpt, outcome) = train(
        &es_cfg,
        &cfg.policy.arch,
        &evaluator,
        &curriculum,
        &pool,
        resume,
        &mut sink,
    )?;
    println!(
        "trained to iteration {} in {:.1} s; checkpoints in {}",
        ckpt.iteration,
        start.elapsed().as_secs_f64(),
        out_dir.display()
    );
    Ok(match outcome {
        TrainOutcome::Completed => Completion::Done,
        TrainOutcome::Interrupted => Completion::Interrupted,
    })
}

pub fn run_eval(args: EvalArgs) -> CliResult<Completion> {
    let cfg = load_config(&args.common.config, Mode::Eval, &args.common)?;
    let out_dir = resolve_out_dir(&args.common.out, &cfg);
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;

    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let episodes = if args.quick {
        10
    } else {
        args.episodes.unwrap_or(cfg.eval.episodes)
    };

    let pool = WorkerPool::new(cfg.workers)?;
    let ctx = EvalContext {
        env: &cfg.env,
        distribution: &cfg.env.throw,
        arch: &checkpoint.arch,
        policy: PolicySelector::Single(&checkpoint.theta),
        stats: &checkpoint.stats,
        rewards: &cfg.rewards,
        filter_cutoff_hz: cfg.policy.action_filter_hz,
        smoothness: cfg.eval.smoothness,
    };
    let report = evaluate_policy(&ctx, episodes, cfg.effective_seed(), &pool)?;

    fs::write(out_dir.join("report.json"), report.to_json()?)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary = format!(
        "{}\n{}\n",
        rally_core::eval::EvalReport::csv_header(),
        report.to_csv_row()
    );
    fs::write(out_dir.join("report.csv"), &summary)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out_dir.join("episodes.csv"), report.episode_csv())
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out_dir.join("events.jsonl"), report.event_log()?)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    println!("{summary}");
    println!("reports written to {}", out_dir.display());
    Ok(Completion::Done)
}

/// Throughput measurement result for one worker count.
#[derive(Debug, Serialize, Deserialize)]
pub struct BenchEntry {
    pub workers: usize,
    pub episodes_per_second: f64,
    pub seconds: f64,
}

/// Benchmark report schema (also consumed by the tests).
#[derive(Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub episodes: usize,
    pub results: Vec<BenchEntry>,
}

pub fn run_bench(args: BenchArgs) -> CliResult<Completion> {
    let cfg = load_config(&args.common.config, Mode::Bench, &args.common)?;
    let out_dir = resolve_out_dir(&args.common.out, &cfg);
    fs::create_dir_all(&out_dir).map_err(|e| CliError::Runtime(e.to_string()))?;

    let evaluator = RolloutEvaluator::new(
        cfg.env.clone(),
        cfg.policy.arch.clone(),
        cfg.policy.action_filter_hz,
        cfg.es.stats_subsample,
    )?;
    let curriculum = cfg.effective_curriculum();
    let stage = curriculum.stage(0);
    let theta = cfg.policy.arch.zero_params();
    let snapshot = rally_core::policy::RunningStats::new().snapshot();
    let episodes = cfg.bench.episodes;

    // Worker ladder: 1, 2, 4, ... capped at the configured count.
    let mut ladder = vec![1_usize];
    while ladder.last().unwrap() * 2 <= cfg.workers.max(1) {
        ladder.push(ladder.last().unwrap() * 2);
    }
    if *ladder.last().unwrap() != cfg.workers.max(1) {
        ladder.push(cfg.workers.max(1));
    }

    let mut report = BenchReport {
        episodes,
        results: Vec::new(),
    };
    println!("workers  episodes/s");
    for &workers in &ladder {
        let pool = WorkerPool::new(workers)?;
        let start = Instant::now();
        let results = pool.map_indexed(episodes, |i| {
            let request = EvalRequest {
                seed: rng::derive_seed(cfg.effective_seed(), &[rng::stream::BENCH, i as u64]),
                rollouts: 1,
                stage,
            };
            evaluator.evaluate(&theta, &snapshot, &request).map(|e| e.fitness)
        });
        for r in results {
            r?;
        }
        let seconds = start.elapsed().as_secs_f64();
        let eps = episodes as f64 / seconds;
        println!("{workers:7}  {eps:10.1}");
        report.results.push(BenchEntry {
            workers,
            episodes_per_second: eps,
            seconds,
        });
    }

    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out_dir.join("bench.json"), json).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("results written to {}", out_dir.join("bench.json").display());
    Ok(Completion::Done)
}
