//! Order-preserving map over independent work items.
//!
//! With the `parallel` feature (default) the map runs on the rayon pool;
//! without it the same call is a plain sequential iterator. Results are
//! collected in input order either way, so outputs are bit-identical across
//! the two modes and across thread counts.

#[cfg(feature = "parallel")]
pub(crate) fn ordered_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn ordered_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}
