//! Order-preserving parallel map; falls back to a plain loop without the
//! `parallel` feature.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Splits `total` items into chunks of at most `size` as `(start, len)`.
pub(crate) fn chunks(total: usize, size: usize) -> Vec<(usize, usize)> {
    let size = size.max(1);
    (0..total.div_ceil(size))
        .map(|i| {
            let start = i * size;
            (start, size.min(total - start))
        })
        .collect()
}
