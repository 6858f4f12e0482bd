//! Internal helpers that switch between rayon and sequential execution.
//!
//! Every helper is shaped so that the parallel and sequential paths produce
//! bit-identical output: chunk boundaries depend only on the data length and
//! per-chunk partials are combined in a fixed order.

/// Chunk size for row-blocked reductions. Fixed so results do not depend on
/// the worker count.
pub(crate) const ROW_CHUNK: usize = 1024;

#[cfg(feature = "parallel")]
pub(crate) fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Applies `f` to each index in `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Maps fixed-size row chunks to partials, then folds the partials in chunk
/// order. `fold` must be associative over adjacent partials for the result to
/// be meaningful; determinism comes from the fixed chunking and fold order.
pub(crate) fn chunked_reduce<T, P, M, F>(rows: &[T], map: M, fold: F) -> Option<P>
where
    T: Sync,
    P: Send,
    M: Fn(&[T]) -> P + Sync + Send,
    F: Fn(P, P) -> P,
{
    let partials = chunk_partials(rows, map);
    partials.into_iter().reduce(fold)
}

#[cfg(feature = "parallel")]
fn chunk_partials<T, P, M>(rows: &[T], map: M) -> Vec<P>
where
    T: Sync,
    P: Send,
    M: Fn(&[T]) -> P + Sync + Send,
{
    use rayon::prelude::*;
    rows.par_chunks(ROW_CHUNK).map(|c| map(c)).collect()
}

#[cfg(not(feature = "parallel"))]
fn chunk_partials<T, P, M>(rows: &[T], map: M) -> Vec<P>
where
    M: Fn(&[T]) -> P,
{
    rows.chunks(ROW_CHUNK).map(|c| map(c)).collect()
}
