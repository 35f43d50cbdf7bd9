//! Index-parallel map used by generation and embedding. Results come back in index order,
//! so output never depends on the thread count.

use crate::error::Result;

#[cfg(feature = "parallel")]
pub fn try_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    F: Fn(usize) -> Result<T>,
{
    (0..n).map(f).collect()
}

/// Splits `0..n` into `shards` contiguous ranges and maps each, keeping shard order.
/// With one shard this is a plain call on the full range.
pub fn map_shards<T, F>(n: usize, shards: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> Result<T> + Sync + Send,
{
    let shards = shards.clamp(1, n.max(1));
    if shards == 1 {
        return Ok(vec![f(0..n)?]);
    }
    let bounds: Vec<_> = (0..shards).map(|s| (s * n / shards)..((s + 1) * n / shards)).collect();
    try_map(shards, |s| f(bounds[s].clone()))
}
