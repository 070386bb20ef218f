//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled and [`Execution::Parallel`] selected,
//! work is spread over the rayon pool. Every helper returns results in input
//! order, so output is identical to the sequential path unless the closure
//! itself mutates shared state.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Single-threaded; every numeric path is bit-reproducible.
    #[default]
    Deterministic,
    /// Multi-threaded where available. SGD trainers update shared weights
    /// without synchronization in this mode and are not reproducible.
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
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

/// Order-preserving map over `0..n`.
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

/// Run `f` on every chunk of `items`; chunks may run concurrently.
pub fn for_each_chunk<T, F>(exec: Execution, items: &[T], chunk: usize, f: F)
where
    T: Sync,
    F: Fn(usize, &[T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        items
            .par_chunks(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    for (i, c) in items.chunks(chunk).enumerate() {
        f(i, c);
    }
}

/// Fold chunks into partial accumulators, then reduce them in chunk order.
pub fn fold_reduce<T, A, Fold, Red>(
    exec: Execution,
    items: &[T],
    chunk: usize,
    init: impl Fn() -> A + Sync + Send,
    fold: Fold,
    reduce: Red,
) -> A
where
    T: Sync,
    A: Send,
    Fold: Fn(&mut A, &T) + Sync + Send,
    Red: Fn(A, A) -> A,
{
    let chunk = chunk.max(1);
    let chunks: Vec<&[T]> = items.chunks(chunk).collect();
    let partials = map(exec, &chunks, |c| {
        let mut acc = init();
        for item in c.iter() {
            fold(&mut acc, item);
        }
        acc
    });
    partials.into_iter().fold(init(), reduce)
}
