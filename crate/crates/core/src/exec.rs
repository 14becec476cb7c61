//! Index-parallel map helpers.
//!
//! With the `parallel` feature (default) work is spread over the current
//! rayon pool; without it the same code runs sequentially. Results are
//! always collected in index order and accumulators are merged left to
//! right over fixed-size chunks, so output never depends on the number of
//! workers.

use crate::error::Result;
use crate::mc::McAccumulator;

/// Samples per chunk when folding into accumulators.
pub const CHUNK: usize = 1024;

#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Fallible [`map_indexed`]; returns the error of the lowest failing index.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Fold `f(0..n)` into an accumulator.
pub fn accumulate<F>(n: usize, f: F) -> Result<McAccumulator>
where
    F: Fn(usize) -> Result<f64> + Sync + Send,
{
    accumulate_with(n, || (), |_, i| f(i))
}

/// Like [`accumulate`] with per-chunk scratch state built by `init`.
pub fn accumulate_with<S, I, F>(n: usize, init: I, f: F) -> Result<McAccumulator>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> Result<f64> + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = try_map_indexed(chunks, |c| {
        let mut scratch = init();
        let mut acc = McAccumulator::new();
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            acc.push(f(&mut scratch, i)?);
        }
        Ok(acc)
    })?;
    Ok(parts.iter().fold(McAccumulator::new(), |a, b| a.merge(b)))
}

/// Fold `f(0..n)` into an accumulator and count the indices flagged by `f`.
pub fn accumulate_flagged<F>(n: usize, f: F) -> Result<(McAccumulator, u64)>
where
    F: Fn(usize) -> Result<(f64, bool)> + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = try_map_indexed(chunks, |c| {
        let mut acc = McAccumulator::new();
        let mut flagged = 0u64;
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            let (v, flag) = f(i)?;
            acc.push(v);
            flagged += u64::from(flag);
        }
        Ok((acc, flagged))
    })?;
    Ok(parts.iter().fold((McAccumulator::new(), 0), |(a, k), (b, j)| (a.merge(b), k + j)))
}

/// Worker count of the current pool (1 without the `parallel` feature).
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
