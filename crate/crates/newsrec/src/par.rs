//! Execution-policy shim: data-parallel map when the `parallel`
//! feature is on, plain sequential otherwise.
//!
//! Only the independent map step runs in parallel; reductions over the
//! results are always ordered sequential folds, so summary numbers are
//! bitwise identical between the two paths and across thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Maps `f` over `items`, preserving input order in the output.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Sequential map with the same contract as [`par_map`], always
/// available so benchmarks can compare the two directly.
pub fn seq_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}
