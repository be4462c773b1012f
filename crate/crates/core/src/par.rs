//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) work is spread over the rayon
//! pool. Without it every call runs on the current thread. Results always come
//! back in input order, so downstream reductions are deterministic either way.

/// How batch work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Parallel when built with the `parallel` feature, sequential otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(&self) -> bool {
        cfg!(feature = "parallel") && *self == Execution::Parallel
    }
}

/// Maps `f` over `items`, keeping input order.
pub fn map_collect<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, keeping order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}
