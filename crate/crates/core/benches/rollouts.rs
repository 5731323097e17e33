//! Rollout throughput: sequential loop vs the rayon worker pool at several
//! thread counts, on the same deterministic episode batch.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use rally_core::es::{EvalRequest, Evaluator, WorkerPool};
use rally_core::policy::{ArchSpec, NormSnapshot};
use rally_core::rewards::{Curriculum, RewardConfig};
use rally_core::rollout::RolloutEvaluator;
use rally_core::sim::{DistributionKind, EnvConfig};

fn rollout_batch(evaluator: &RolloutEvaluator, pool: &WorkerPool, episodes: usize) -> f64 {
    let curriculum = Curriculum::single(DistributionKind::Forehand, RewardConfig::sparse());
    let stage = curriculum.stage(0);
    let snapshot = NormSnapshot::identity();
    let theta = evaluator.arch.zero_params();
    let results = pool.map_indexed(episodes, |i| {
        let request = EvalRequest {
            seed: i as u64,
            rollouts: 1,
            stage,
        };
        evaluator
            .evaluate(&theta, &snapshot, &request)
            .expect("rollout")
            .fitness
    });
    results.iter().sum()
}

fn bench_rollouts(c: &mut Criterion) {
    let evaluator = RolloutEvaluator::new(EnvConfig::default(), ArchSpec::gated_cnn(), None, 10)
        .expect("evaluator");
    let episodes = 32;

    let mut group = c.benchmark_group("rollout_batch");
    group.throughput(Throughput::Elements(episodes as u64));
    group.sample_size(10);

    group.bench_function("sequential", |b| {
        let pool = WorkerPool::sequential();
        b.iter(|| rollout_batch(&evaluator, &pool, episodes));
    });
    #[cfg(feature = "parallel")]
    for workers in [2, 4] {
        group.bench_with_input(
            BenchmarkId::new("parallel", workers),
            &workers,
            |b, &workers| {
                let pool = WorkerPool::new(workers).expect("pool");
                b.iter(|| rollout_batch(&evaluator, &pool, episodes));
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_rollouts);
criterion_main!(benches);
