//! Thin switch between rayon data parallelism and sequential fallback.
//!
//! Every parallel site in the crate is a map over independent work items
//! (coil channels, FFT rows, probe bands, batch entries) collected in input
//! order, so enabling or disabling the `parallel` feature never changes
//! results, only wall time. Reductions that feed outputs stay sequential.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is enabled.
/// Output order always matches input order.
pub fn map_collect<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Applies `f` to each row of `data` (contiguous chunks of `row_len`),
/// in parallel when the `parallel` feature is enabled.
pub fn for_each_row<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    debug_assert_eq!(data.len() % row_len, 0);
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(row_len).for_each(|row| f(row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(row_len).for_each(|row| f(row));
    }
}

/// Maps `f` over index range `0..n`, collecting results in index order.
pub fn map_indices<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
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
