//! Trial scheduling. Each trial owns its random streams, so the thread
//! count changes only the wall time, never the results or their order.

use rayon::prelude::*;

use crate::error::{config_err, CliResult};

/// Run `f(0..count)` on `jobs` threads (0 = one per core), results in index order.
pub fn run_indexed<T, F>(jobs: usize, count: usize, f: F) -> CliResult<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> CliResult<T> + Sync + Send,
{
    if jobs == 1 {
        return (0..count).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| config_err(format!("cannot start {jobs} worker threads: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_jobs() {
        let f = |i: usize| Ok(i * i);
        let seq = run_indexed(1, 50, f).unwrap();
        assert_eq!(seq, run_indexed(4, 50, f).unwrap());
        assert_eq!(seq, run_indexed(0, 50, f).unwrap());
        let err = run_indexed(3, 10, |i| if i == 7 { Err(config_err("seven")) } else { Ok(i) });
        assert!(err.is_err());
    }
}
