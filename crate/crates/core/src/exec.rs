//! Execution helpers for the data-parallel inner loops (sampling sweeps,
//! residual maxima). With the `parallel` feature the indexed variants run on
//! rayon; the `_seq` twins are always sequential and exist so benchmarks can
//! compare both in one build.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}

pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Maximum of `f` over `0..n`; NaN counts as +inf so that a poisoned sample
/// can never report success.
pub fn max_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let vals = map_indexed(n, f);
    fold_max(vals.into_iter())
}

pub fn max_indexed_seq<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64,
{
    fold_max((0..n).map(f))
}

fn fold_max(vals: impl Iterator<Item = f64>) -> f64 {
    let mut m = f64::NEG_INFINITY;
    for v in vals {
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v > m {
            m = v;
        }
    }
    m
}
