//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! the same closures in index order. Callers derive per-item RNG substreams
//! from indices, so both paths give identical results except where the
//! caller explicitly shares mutable state across tasks (hogwild training).

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Maps `f` over a slice with per-task scratch state created by `init`.
pub fn map_slice_init<S, T, I, INIT, F>(items: &[S], init: INIT, f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    INIT: Fn() -> I + Sync + Send,
    F: Fn(&mut I, &S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map_init(init, f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut state = init();
        items.iter().map(|s| f(&mut state, s)).collect()
    }
}

/// True when this build can run tasks concurrently.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Fixed-size worker group for tasks that share mutable state
/// (lock-free training). `workers == 1` always runs inline.
pub struct Workers {
    count: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn new(count: usize) -> Self {
        let count = count.max(1);
        #[cfg(feature = "parallel")]
        {
            let pool = if count > 1 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(count)
                    .build()
                    .ok()
            } else {
                None
            };
            Workers { count, pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            Workers { count }
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Runs `f(task)` for every task index in `0..tasks`, concurrently when a
    /// pool is available, and collects results in task order.
    pub fn run<T, F>(&self, tasks: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..tasks).into_par_iter().map(&f).collect());
        }
        (0..tasks).map(f).collect()
    }
}
