//! Order-preserving parallel evaluation of per-slot work.

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::error::{Error, Result};

/// Environment variable that overrides the configured worker count.
pub const WORKERS_ENV: &str = "MULTIPROP_WORKERS";

/// Work pool used for per-iteration proposal generation and target evaluation.
///
/// With one worker everything runs inline on the calling thread.
pub struct Executor {
    pool: Option<ThreadPool>,
    workers: usize,
}

impl Executor {
    /// `workers == 0` picks the number of available cores.
    pub fn new(workers: usize) -> Result<Self> {
        let workers = if workers == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            workers
        };
        if workers == 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        Ok(Executor {
            pool: Some(pool),
            workers,
        })
    }

    /// Resolves the worker count from `MULTIPROP_WORKERS`, falling back to `configured`.
    pub fn from_env_or(configured: usize) -> Result<Self> {
        let workers = match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("{WORKERS_ENV}={v} is not a worker count")))?,
            Err(_) => configured,
        };
        Self::new(workers)
    }

    pub fn serial() -> Self {
        Executor {
            pool: None,
            workers: 1,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Maps `f` over `items`, returning results in input order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match &self.pool {
            None => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
            Some(pool) => {
                pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect())
            }
        }
    }

    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::serial()
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor")
            .field("workers", &self.workers)
            .finish()
    }
}

/// Fallible order-preserving map. When several evaluations fail, the error
/// at the lowest index is returned regardless of completion order.
pub fn parallel_map<T, R, E, F>(exec: &Executor, items: &[T], evaluator: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    exec.map(items, |_, x| evaluator(x)).into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_preserves_order() {
        let exec = Executor::new(4).unwrap();
        let items: Vec<u32> = (0..1000).collect();
        let out: Vec<u32> = parallel_map(&exec, &items, |x| Ok::<_, ()>(*x)).unwrap();
        assert_eq!(out, items);
    }

    #[test]
    fn lowest_index_error_wins() {
        let exec = Executor::new(4).unwrap();
        let items: Vec<u32> = (0..500).collect();
        let err = parallel_map(
            &exec,
            &items,
            |&x| if x % 97 == 13 { Err(x) } else { Ok(x) },
        )
        .unwrap_err();
        assert_eq!(err, 13);
    }

    #[test]
    fn zero_means_auto() {
        let exec = Executor::new(0).unwrap();
        assert!(exec.workers() >= 1);
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let items: Vec<Vec<f64>> = (0..2000)
            .map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let phi = |q: &Vec<f64>| Ok::<_, ()>(q.iter().map(|x| x.powi(4) - x.sin()).sum::<f64>());
        let bytes = |v: Vec<f64>| v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>();
        let one = bytes(parallel_map(&Executor::new(1).unwrap(), &items, phi).unwrap());
        let eight = bytes(parallel_map(&Executor::new(8).unwrap(), &items, phi).unwrap());
        assert_eq!(one, eight);
    }
}
