//! Replication driver.
//!
//! Fans a seeded closure over replication indices, either serially or on a
//! bounded rayon pool.  Results come back in replication order regardless of
//! the worker count, so report bytes never depend on scheduling.

use rayon::prelude::*;

/// Runs `f(0), ..., f(count - 1)` and collects the results in index order.
///
/// `workers == 1` executes serially on the calling thread.  `workers == 0`
/// delegates to rayon's default pool size.  Any other value builds a pool of
/// exactly that many threads.  The closure must derive all randomness from its
/// replication index; the driver adds no nondeterminism beyond scheduling,
/// and ordered collection hides even that.
pub fn replications<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if workers == 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("replication pool");
    pool.install(|| (0..count).into_par_iter().map(f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_replication_order() {
        let out = replications(100, 3, |i| i * i);
        let expect: Vec<usize> = (0..100).map(|i| i * i).collect();
        assert_eq!(out, expect);
    }

    #[test]
    fn worker_count_never_changes_values() {
        let job = |i: usize| {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(i as u64);
            rng.random::<f64>()
        };
        let serial = replications(40, 1, job);
        let pooled = replications(40, 4, job);
        let default_pool = replications(40, 0, job);
        assert_eq!(serial, pooled);
        assert_eq!(serial, default_pool);
    }
}
