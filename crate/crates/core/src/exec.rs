//! Parallel/sequential execution switch.
//!
//! With the default `parallel` feature the helpers below fan work out over
//! rayon; without it they degrade to plain sequential loops with identical
//! results. Two rules keep outputs byte-identical across thread counts and
//! across the two builds:
//!
//! 1. every unit of work derives its own RNG stream from its *index*, never
//!    from the worker thread, and
//! 2. parallel code only does order-preserving map–collect; floating-point
//!    reductions happen sequentially over the collected buffer, so summation
//!    order never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice, preserving order in the output.
pub fn map_slice<'a, T, U, F>(items: &'a [T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&'a T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sums `f` over a slice with a deterministic (sequential, in-order)
/// final reduction. The per-item evaluations may run in parallel.
pub fn sum_by<T, F>(items: &[T], f: F) -> f64
where
    T: Sync,
    F: Fn(&T) -> f64 + Sync + Send,
{
    map_slice(items, f).into_iter().sum()
}

/// True when this build fans work out over rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
