//! Data-parallel helpers.
//!
//! Every batch loop in the crate (Gibbs rows, per-node solves, experiment
//! trials, enumeration sums) goes through [`map_indexed`]. With the
//! `parallel` feature the work is spread over the rayon pool; without it, or
//! when [`Exec::Sequential`] is requested, the same closure runs in a plain
//! loop. Results are always returned in index order, so output never depends
//! on scheduling.

/// Execution strategy for batch loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise falls back
    /// to sequential execution.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Number of worker threads `Exec::Parallel` will use.
pub fn num_threads() -> usize {
    #[cfg(feature = "parallel")]
    return rayon::current_num_threads();

    #[cfg(not(feature = "parallel"))]
    return 1;
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] but short-circuits on the first error (by index order
/// in the sequential case; in the parallel case whichever error rayon sees).
pub fn try_map_indexed<R, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<R>, E>
where
    R: Send,
    E: Send,
    F: Fn(usize) -> Result<R, E> + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Sums `f(i)` over `0..n` in fixed-size chunks whose partial sums are
/// combined in index order, so the result is bit-identical regardless of
/// `exec` or thread count.
pub fn chunked_sum<F>(exec: Exec, n: usize, chunk: usize, dim: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Send + Sync,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let partials = map_indexed(exec, n_chunks, |c| {
        let mut acc = vec![0.0; dim];
        for i in c * chunk..((c + 1) * chunk).min(n) {
            f(i, &mut acc);
        }
        acc
    });
    let mut total = vec![0.0; dim];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}
