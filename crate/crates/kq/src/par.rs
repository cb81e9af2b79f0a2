//! Data-parallel mode loops.
//!
//! Every evolution operation is an independent map over momentum modes; the
//! reduction to a density happens afterwards, sequentially and in grid order,
//! so results are identical for any worker count. With the `parallel` feature
//! (default) the map runs on the rayon pool; without it the same code runs
//! sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Order-preserving map over mode indices `0..n`.
#[cfg(feature = "parallel")]
pub fn map_modes<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_modes<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    map_modes_seq(n, f)
}

/// Fallible order-preserving map over mode indices; first error wins.
#[cfg(feature = "parallel")]
pub fn try_map_modes<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map_modes<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    F: Fn(usize) -> Result<T, E>,
{
    (0..n).map(f).collect()
}

/// Sequential map, always available; the baseline arm of the benches.
pub fn map_modes_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
