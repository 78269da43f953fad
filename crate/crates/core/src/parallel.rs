//! Deterministic fan-out over independent work items.
//!
//! Workers pull indices from a shared counter and return `(index, value)`
//! pairs; results are merged into index order, so the output (and any
//! reduction performed over it in order) is bit-identical to the sequential
//! run regardless of worker count. `MORPHNET_THREADS` caps the worker count;
//! `MORPHNET_THREADS=1` forces sequential execution.

use std::sync::atomic::{AtomicUsize, Ordering};

/// Worker count: min(available parallelism, MORPHNET_THREADS), at least 1.
pub fn worker_count() -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("MORPHNET_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(usize::MAX);
    hw.min(cap).max(1)
}

/// Apply `f` to every index in `0..n`, collecting results in index order.
///
/// `f` must be pure in the sense that the result for index `i` does not
/// depend on evaluation order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = worker_count().min(n.max(1));
    if workers <= 1 || n < 2 {
        return (0..n).map(f).collect();
    }

    let next = AtomicUsize::new(0);
    let chunks: Vec<Vec<(usize, T)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        local.push((i, f(i)));
                    }
                    local
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });

    let mut out: Vec<Option<T>> = Vec::with_capacity(n);
    out.resize_with(n, || None);
    for chunk in chunks {
        for (i, v) in chunk {
            out[i] = Some(v);
        }
    }
    out.into_iter()
        .map(|v| v.expect("every index was claimed by a worker"))
        .collect()
}
