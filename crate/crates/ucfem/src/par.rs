//! Runtime switch between serial and data-parallel element loops.
//!
//! Element-local work (local matrices, per-element integrals) is embarrassingly
//! parallel; global accumulation is not, because floating-point addition does
//! not commute bitwise under reordering. The contract here is therefore:
//! per-element values may be computed on any number of threads, but they are
//! always reduced in element order on one thread. Serial and parallel runs of
//! any routine built on [`map_indexed`] produce bitwise-identical results.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enables or disables the rayon element loops at runtime. Without the
/// `parallel` feature this is a no-op and execution is always serial.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

/// Whether element loops currently run on the rayon pool.
pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Maps `f` over `0..n`, collecting results in index order. Runs on the rayon
/// pool when enabled, serially otherwise; the output is identical either way.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Sums `f(i)` over `0..n` in strict index order. The per-index values may be
/// computed in parallel; the reduction is always ordered, so the sum is
/// independent of the thread count.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_indexed(n, f).into_iter().sum()
}
