//! Thin dispatch layer: rayon when `parallel` is enabled, plain iterators otherwise.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(row_index, row)` for every `width`-sized chunk of `data`.
pub(crate) fn for_each_row<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(width)
        .enumerate()
        .for_each(|(v, row)| f(v, row));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(v, row)| f(v, row));
}

/// Order-preserving map.
pub(crate) fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Fold over fixed-size chunks and merge the partial results.
pub(crate) fn fold_chunks<T, A, I, F, M>(items: &[T], chunk: usize, init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(A, &[T]) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items
        .par_chunks(chunk.max(1))
        .fold(&init, &fold)
        .reduce(&init, &merge);
    #[cfg(not(feature = "parallel"))]
    {
        let _ = &merge;
        items.chunks(chunk.max(1)).fold(init(), fold)
    }
}
