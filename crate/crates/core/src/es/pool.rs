//! Rollout worker pool. With the `parallel` feature the pool fans jobs out
//! over rayon; without it, or with a single worker, it degrades to a
//! sequential loop. Results are keyed by job index either way, so downstream
//! aggregation never observes completion order.

use crate::error::{Error, Result};

pub struct WorkerPool {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl WorkerPool {
    /// A pool with `workers` threads; `workers <= 1` runs inline.
    pub fn new(workers: usize) -> Result<Self> {
        let workers = workers.max(1);
        #[cfg(feature = "parallel")]
        {
            let pool = if workers > 1 {
                Some(
                    rayon::ThreadPoolBuilder::new()
                        .num_threads(workers)
                        .build()
                        .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
                )
            } else {
                None
            };
            Ok(WorkerPool { workers, pool })
        }
        #[cfg(not(feature = "parallel"))]
        {
            Ok(WorkerPool { workers })
        }
    }

    pub fn sequential() -> Self {
        WorkerPool::new(1).expect("sequential pool")
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Maps `f` over `0..count`, returning results in index order.
    pub fn map_indexed<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..count).into_par_iter().map(f).collect());
        }
        (0..count).map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_arrive_in_index_order() {
        for workers in [1, 2, 4] {
            let pool = WorkerPool::new(workers).unwrap();
            let out = pool.map_indexed(64, |i| i * i);
            assert_eq!(out, (0..64).map(|i| i * i).collect::<Vec<_>>());
        }
    }
}
