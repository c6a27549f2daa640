//! Data-parallel helpers over grid points.
//!
//! Every pointwise kernel in the crate goes through [`map_points`] and every
//! reduction through [`sum`], [`min_with_index`] or [`max_with_index`]. With
//! the `parallel` feature these fan out over rayon; without it they run on the
//! calling thread. Reductions split the input into fixed-size chunks, reduce
//! each chunk left to right and then combine the partials left to right, so the
//! result is bit-identical for any thread count and for both execution modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Chunk length for deterministic reductions.
pub const REDUCE_CHUNK: usize = 1024;

/// Execution mode for the pointwise kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// Falls back to sequential when the crate is built without `parallel`.
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Applies `f` to every index in `0..len` and collects the results in order.
pub fn map_points<T, F>(exec: Exec, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..len).into_par_iter().map(f).collect(),
        _ => (0..len).map(f).collect(),
    }
}

/// Fallible variant of [`map_points`]. On failure the error from the lowest
/// failing index is returned, independent of scheduling.
pub fn try_map_points<T, E, F>(exec: Exec, len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            let results: Vec<Result<T, E>> = (0..len).into_par_iter().map(f).collect();
            results.into_iter().collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Fills `out[i] = f(i)` for chunks of `stride` values per point.
pub fn fill_strided<F>(exec: Exec, out: &mut [f64], stride: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => out
            .par_chunks_mut(stride)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk)),
        _ => out
            .chunks_mut(stride)
            .enumerate()
            .for_each(|(i, chunk)| f(i, chunk)),
    }
}

fn chunk_sum(chunk: &[f64]) -> f64 {
    chunk.iter().fold(0.0, |acc, &x| acc + x)
}

/// Deterministic sum of `values`.
pub fn sum(exec: Exec, values: &[f64]) -> f64 {
    let partials: Vec<f64> = match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => values.par_chunks(REDUCE_CHUNK).map(chunk_sum).collect(),
        _ => values.chunks(REDUCE_CHUNK).map(chunk_sum).collect(),
    };
    chunk_sum(&partials)
}

/// Deterministic sum of `f(i)` over `0..len` without materializing the values.
pub fn sum_by<F>(exec: Exec, len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let reduce = |c: usize| {
        let start = c * REDUCE_CHUNK;
        let end = (start + REDUCE_CHUNK).min(len);
        (start..end).fold(0.0, |acc, i| acc + f(i))
    };
    let partials = map_points(exec, chunks, reduce);
    chunk_sum(&partials)
}

/// Minimum value and the first index attaining it.
pub fn min_with_index(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, x)| match best {
            Some((_, b)) if b <= x => best,
            _ => Some((i, x)),
        })
}

/// Maximum value and the first index attaining it.
pub fn max_with_index(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, x)| match best {
            Some((_, b)) if b >= x => best,
            _ => Some((i, x)),
        })
}
