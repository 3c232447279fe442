//! Index-parallel map with a sequential fallback.
//!
//! Results are collected in index order, so callers get the same output
//! regardless of the thread count or whether `parallel` is enabled.

#[cfg(feature = "parallel")]
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Like [`map_indices`] but hands each worker a scratch value built by `init`.
#[cfg(feature = "parallel")]
pub(crate) fn map_indices_with<S, T, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    T: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map_init(init, f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indices_with<S, T, I, F>(n: usize, init: I, f: F) -> Vec<T>
where
    I: Fn() -> S,
    F: Fn(&mut S, usize) -> T,
{
    let mut scratch = init();
    (0..n).map(|i| f(&mut scratch, i)).collect()
}
