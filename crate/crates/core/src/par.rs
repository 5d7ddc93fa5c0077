//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the helpers fan work out over the current rayon
//! pool when asked to; without it, or with [`Execution::Sequential`], they run
//! a plain iterator. Results are always returned in input order.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether parallel execution is both requested and compiled in.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

#[allow(unused_variables)]
pub fn map<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Like [`map`], with per-thread scratch state created by `init`.
#[allow(unused_variables)]
pub fn map_init<T, S, U, I, F>(exec: Execution, items: &[T], init: I, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map_init(&init, |s, t| f(s, t)).collect();
    }
    let mut scratch = init();
    items.iter().map(|t| f(&mut scratch, t)).collect()
}

/// A lane of compute threads. Runs closures inside a dedicated rayon pool of
/// the requested width when parallel execution is enabled.
pub struct Lane {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
    exec: Execution,
}

impl Lane {
    #[allow(unused_variables)]
    pub fn new(exec: Execution, threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let pool = if exec.is_parallel() {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads.max(1))
                    .build()
                    .ok()
            } else {
                None
            };
            Lane { pool, exec }
        }
        #[cfg(not(feature = "parallel"))]
        Lane { exec }
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(f);
        }
        f()
    }
}
