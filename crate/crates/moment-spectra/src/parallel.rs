//! Data-parallel scaffolding with a sequential fallback.
//!
//! Every reduction here follows a *fixed* binary tree over chunk indices:
//! the tree shape depends only on the chunk count, never on thread
//! scheduling, so the parallel build (`parallel` feature, default) and the
//! sequential build produce bit-identical floating-point results.

/// Samples per accumulation chunk. Fixed so that chunk boundaries, and
/// therefore floating-point summation order, never depend on thread
/// count.
pub const CHUNK_SIZE: usize = 1024;

/// Reduces `leaf(0..n_chunks)` over a fixed binary tree, splitting ranges
/// at the midpoint. Runs on rayon when the `parallel` feature is enabled.
pub fn tree_reduce<T, L, M>(n_chunks: usize, leaf: &L, merge: &M) -> Option<T>
where
    T: Send,
    L: Fn(usize) -> T + Sync,
    M: Fn(T, T) -> T + Sync,
{
    if n_chunks == 0 {
        return None;
    }
    #[cfg(feature = "parallel")]
    {
        Some(tree_reduce_par(0, n_chunks, leaf, merge))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Some(tree_reduce_range_seq(0, n_chunks, leaf, merge))
    }
}

/// Sequential reference path: the same tree, no thread pool. Kept
/// unconditionally compiled so benchmarks can compare both paths in one
/// binary and tests can assert bit-identity.
pub fn tree_reduce_seq<T, L, M>(n_chunks: usize, leaf: &L, merge: &M) -> Option<T>
where
    L: Fn(usize) -> T,
    M: Fn(T, T) -> T,
{
    if n_chunks == 0 {
        None
    } else {
        Some(tree_reduce_range_seq(0, n_chunks, leaf, merge))
    }
}

fn tree_reduce_range_seq<T, L, M>(lo: usize, hi: usize, leaf: &L, merge: &M) -> T
where
    L: Fn(usize) -> T,
    M: Fn(T, T) -> T,
{
    if hi - lo == 1 {
        return leaf(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let left = tree_reduce_range_seq(lo, mid, leaf, merge);
    let right = tree_reduce_range_seq(mid, hi, leaf, merge);
    merge(left, right)
}

#[cfg(feature = "parallel")]
fn tree_reduce_par<T, L, M>(lo: usize, hi: usize, leaf: &L, merge: &M) -> T
where
    T: Send,
    L: Fn(usize) -> T + Sync,
    M: Fn(T, T) -> T + Sync,
{
    if hi - lo == 1 {
        return leaf(lo);
    }
    let mid = lo + (hi - lo) / 2;
    let (left, right) = rayon::join(
        || tree_reduce_par(lo, mid, leaf, merge),
        || tree_reduce_par(mid, hi, leaf, merge),
    );
    merge(left, right)
}

/// Maps `f` over `0..n` collecting results in index order. The output is
/// identical to a sequential map; only wall-clock time changes.
pub fn indexed_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Argmax of `score(i)` for i in 0..n with ties broken by the smallest
/// index; deterministic under any parallel partition because f64 `max`
/// with an index tie rule is associative. Returns `None` for n = 0 or if
/// every score is `None`.
pub fn indexed_argmax<F>(n: usize, score: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    let pick = |a: Option<(usize, f64)>, b: Option<(usize, f64)>| match (a, b) {
        (None, x) => x,
        (x, None) => x,
        (Some((ia, va)), Some((ib, vb))) => {
            if vb > va || (vb == va && ib < ia) {
                Some((ib, vb))
            } else {
                Some((ia, va))
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n)
            .into_par_iter()
            .map(|i| score(i).map(|v| (i, v)))
            .reduce(|| None, pick)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(|i| score(i).map(|v| (i, v))).fold(None, pick)
    }
}

/// Number of fixed-size chunks covering `len` items.
pub fn chunk_count(len: usize, chunk: usize) -> usize {
    len.div_ceil(chunk)
}

/// Configures the global worker pool from the `MOMENT_SPECTRA_THREADS`
/// environment variable (default: available parallelism). Without the
/// `parallel` feature this validates the variable and otherwise does
/// nothing. Safe to call more than once; later calls are ignored.
pub fn configure_threads_from_env() -> Result<usize, String> {
    let requested = match std::env::var("MOMENT_SPECTRA_THREADS") {
        Ok(s) => Some(
            s.trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n >= 1)
                .ok_or_else(|| {
                    format!("MOMENT_SPECTRA_THREADS must be a positive integer, got {s:?}")
                })?,
        ),
        Err(_) => None,
    };
    #[cfg(feature = "parallel")]
    {
        if let Some(n) = requested {
            // An Err means a global pool already exists; that pool wins.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = requested;
        Ok(1)
    }
}
