//! Data-parallel helpers. With the `parallel` feature these fan out over
//! rayon's global pool; without it everything runs on the calling thread.
//! Results are identical either way since every mapped closure is pure.

/// Inputs shorter than this are mapped sequentially even when `parallel` is
/// on; the per-element work is too small to amortize the fork/join.
pub const PAR_MIN_LEN: usize = 16 * 1024;

/// `(0..n).map(f).collect()`, parallel for long inputs.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n >= PAR_MIN_LEN {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Maps a slice of independent work items.
pub fn map_items<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential counterpart of [`map_items`], always available so callers
/// (and benches) can compare the two paths in one build.
pub fn map_items_sequential<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    F: Fn(&I) -> T,
{
    items.iter().map(f).collect()
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
