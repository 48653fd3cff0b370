//! Runtime switch between the rayon data-parallel paths and the sequential
//! fallback.
//!
//! With the `parallel` feature enabled (the default) the hot loops — matmul
//! row blocks and evaluation rollouts — fan out over rayon. Both paths
//! compute every output element with an identical accumulation order, so
//! flipping the switch never changes results. Without the feature the crate
//! compiles with no rayon dependency and `is_enabled` is always false.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Whether data-parallel execution is currently active.
pub fn is_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

/// Globally enable or disable the parallel paths at runtime. A no-op build
/// without the `parallel` feature stays sequential regardless.
pub fn set_enabled(on: bool) {
    PARALLEL.store(on, Ordering::Relaxed);
}

/// Run `f` with the parallel switch forced to `on`, restoring the previous
/// value afterwards. Used by benchmarks to compare both paths in one build.
pub fn with_parallelism<T>(on: bool, f: impl FnOnce() -> T) -> T {
    let prev = PARALLEL.swap(on, Ordering::Relaxed);
    let out = f();
    PARALLEL.store(prev, Ordering::Relaxed);
    out
}

/// Map `items` to a vector, in parallel when enabled, preserving order.
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_enabled() {
            use rayon::prelude::*;
            return items.into_par_iter().map(f).collect();
        }
    }
    items.into_iter().map(f).collect()
}
