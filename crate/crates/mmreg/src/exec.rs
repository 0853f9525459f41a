//! Row-parallel execution helpers.
//!
//! Every hot loop in the crate is expressed as an independent per-row map so
//! that the `parallel` feature (rayon) and the sequential fallback produce
//! bitwise-identical results: rows write disjoint output slices, and all
//! floating-point reductions are combined in row order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to each `width`-sized row of `out`, in parallel when enabled.
#[cfg(feature = "parallel")]
pub(crate) fn for_each_row<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    out.par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| f(y, row));
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn for_each_row<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    for (y, row) in out.chunks_mut(width).enumerate() {
        f(y, row);
    }
}

/// Map every row index to a value, preserving row order in the result.
#[cfg(feature = "parallel")]
pub(crate) fn map_rows<T, F>(height: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..height).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_rows<T, F>(height: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..height).map(f).collect()
}

/// Sum a per-row quantity deterministically: row partials are computed in
/// parallel, then folded in row order so the float result never depends on
/// the thread schedule.
pub(crate) fn sum_rows<F>(height: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_rows(height, f).into_iter().sum()
}
