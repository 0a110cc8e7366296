//! Index-parallel helpers. Results are collected in index order and the
//! first error by index wins, so nothing depends on the number of workers.

use crate::error::Result;

#[cfg(feature = "parallel")]
fn map_all<T, F>(n: usize, min_len: usize, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().with_min_len(min_len).map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_all<T, F>(n: usize, _min_len: usize, f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Fine-grained map over particle indices.
pub(crate) fn try_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_all(n, 256, f).into_iter().collect()
}

/// Coarse-grained map for independent jobs (seeds, trials, batches).
pub(crate) fn try_map_jobs<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_all(n, 1, f).into_iter().collect()
}

/// Applies `f` to consecutive `chunk`-sized pieces of `data`, with the
/// piece index.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_chunk<F>(data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    data.par_chunks_mut(chunk)
        .with_min_len(256)
        .enumerate()
        .for_each(|(idx, piece)| f(idx, piece));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_chunk<F>(data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    data.chunks_mut(chunk)
        .enumerate()
        .for_each(|(idx, piece)| f(idx, piece));
}
