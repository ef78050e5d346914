//! Data-parallel helpers.
//!
//! With the `parallel` feature the pointwise kernels fan out over rayon;
//! without it (or after [`set_parallel(false)`]) they run on the calling
//! thread. Every helper writes disjoint outputs and never reduces in
//! parallel, so both paths give bit-identical results.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

static PARALLEL: AtomicBool = AtomicBool::new(true);

/// Below this many elements the parallel path is not worth the fork.
#[cfg(feature = "parallel")]
const MIN_PAR_LEN: usize = 2048;

/// Runtime switch between the rayon path and the sequential fallback.
/// Has no effect when the crate is built without `parallel`.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on, Ordering::SeqCst);
}

/// True when the rayon path is compiled in, switched on, and has more than
/// one worker to fan out to.
pub fn parallel_enabled() -> bool {
    #[cfg(feature = "parallel")]
    {
        PARALLEL.load(Ordering::Relaxed) && rayon::current_num_threads() > 1
    }
    #[cfg(not(feature = "parallel"))]
    {
        false
    }
}

/// `out[i] = f(i)` for every index.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && out.len() >= MIN_PAR_LEN {
        out.par_iter_mut()
            .with_min_len(MIN_PAR_LEN / 2)
            .enumerate()
            .for_each(|(i, v)| *v = f(i));
        return;
    }
    for (i, v) in out.iter_mut().enumerate() {
        *v = f(i);
    }
}

/// `(0..n).map(f)` collected in order, without zero-filling first.
pub fn collect_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && n >= MIN_PAR_LEN {
        return (0..n).into_par_iter().with_min_len(MIN_PAR_LEN / 2).map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Calls `f(chunk_index, chunk)` on consecutive chunks of `chunk` elements.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && data.len() >= MIN_PAR_LEN && data.len() > chunk {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Maps `f` over `0..n` and collects in order. Used for coarse-grained
/// tasks (form components, independent checks).
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() && n > 1 {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}
