//! Data-parallel helpers. Every hot loop in the crate goes through here so the
//! execution mode can be switched at runtime (benchmarks) or compiled out.

use std::sync::atomic::{AtomicBool, Ordering};

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parallelism {
    Sequential,
    Parallel,
}

/// Selects the execution mode for subsequent calls. Without the `parallel`
/// feature everything runs sequentially regardless.
pub fn set_parallelism(mode: Parallelism) {
    SEQUENTIAL.store(mode == Parallelism::Sequential, Ordering::Relaxed);
}

pub fn parallelism() -> Parallelism {
    if cfg!(feature = "parallel") && !SEQUENTIAL.load(Ordering::Relaxed) {
        Parallelism::Parallel
    } else {
        Parallelism::Sequential
    }
}

/// `(0..n).map(f).collect()`, in parallel when enabled.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallelism() == Parallelism::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Parallel map over a slice.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(items.len(), |i| f(&items[i]))
}
