//! Data-parallel mapping with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] fans
//! work out over the rayon thread pool. Without it, both variants run on the
//! calling thread. Results always come back in input order, so callers that
//! reduce them sequentially get the same floating-point answer either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How batch operations distribute their per-item work.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Single-threaded, in input order.
    Sequential,
    /// Rayon work-stealing when compiled with `parallel`, sequential otherwise.
    #[default]
    Parallel,
}

impl Execution {
    /// True when this mode will actually use more than the calling thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `items` and returns the outputs in input order.
pub(crate) fn map_ordered<T, U, F>(items: &[T], exec: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let _ = exec;
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}
