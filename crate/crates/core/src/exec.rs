//! Row-partitioned execution helpers.
//!
//! Every data-parallel loop in the crate goes through these helpers so the
//! sequential and rayon paths share one code path. Reductions are always
//! computed per row and then summed in row order, which keeps results
//! bit-identical regardless of thread count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` when the `parallel` feature is compiled in, else `Sequential`.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// Sizes the global worker pool; `0` keeps the default. Returns the
/// execution mode to use: `Sequential` for one thread.
pub fn configure_threads(threads: usize) -> Execution {
    if threads == 1 {
        return Execution::Sequential;
    }
    #[cfg(feature = "parallel")]
    if threads > 1 {
        // a second call keeps the first pool, which is harmless here
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    Execution::Parallel.effective()
}

/// Calls `f(row, chunk)` for each `row_len`-sized chunk of `data`.
pub fn for_each_row<F>(exec: Execution, data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            data.par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(j, row)| f(j, row));
        }
        _ => data
            .chunks_mut(row_len)
            .enumerate()
            .for_each(|(j, row)| f(j, row)),
    }
}

/// Like [`for_each_row`] but over three equally shaped buffers at once.
pub fn for_each_row3<F>(
    exec: Execution,
    a: &mut [f64],
    b: &mut [f64],
    c: &mut [f64],
    row_len: usize,
    f: F,
) where
    F: Fn(usize, &mut [f64], &mut [f64], &mut [f64]) + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            a.par_chunks_mut(row_len)
                .zip(b.par_chunks_mut(row_len))
                .zip(c.par_chunks_mut(row_len))
                .enumerate()
                .for_each(|(j, ((ra, rb), rc))| f(j, ra, rb, rc));
        }
        _ => a
            .chunks_mut(row_len)
            .zip(b.chunks_mut(row_len))
            .zip(c.chunks_mut(row_len))
            .enumerate()
            .for_each(|(j, ((ra, rb), rc))| f(j, ra, rb, rc)),
    }
}

/// Evaluates `f` on `0..n` and collects the results in index order.
pub fn map_collect<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec.effective() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Deterministic sum of `f(row)` over `0..nrows`: rows may be evaluated
/// concurrently, the final accumulation is in row order.
pub fn sum_rows<F>(exec: Execution, nrows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_collect(exec, nrows, f).into_iter().sum()
}

/// Deterministic maximum of `f(row)` over `0..nrows` (NaN-propagating).
pub fn max_rows<F>(exec: Execution, nrows: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    map_collect(exec, nrows, f)
        .into_iter()
        .fold(
            0.0_f64,
            |acc, v| if v.is_nan() || v > acc { v } else { acc },
        )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_identical_across_modes() {
        let f = |j: usize| (j as f64 * 0.1).sin() / 3.0;
        let a = sum_rows(Execution::Sequential, 1000, f);
        let b = sum_rows(Execution::Parallel, 1000, f);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn rows_visit_every_chunk() {
        let mut v = vec![0.0; 12];
        for_each_row(Execution::Parallel, &mut v, 4, |j, row| {
            row.iter_mut().for_each(|x| *x = j as f64)
        });
        assert_eq!(v, [0., 0., 0., 0., 1., 1., 1., 1., 2., 2., 2., 2.]);
    }

    #[test]
    fn max_propagates_nan() {
        assert!(max_rows(Execution::Sequential, 3, |j| if j == 1 {
            f64::NAN
        } else {
            1.0
        })
        .is_nan());
    }
}
