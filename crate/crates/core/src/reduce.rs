//! Deterministic parallel reductions.
//!
//! Sums are taken over fixed-size chunks in index order and the chunk partials
//! are combined sequentially, so the result does not depend on the number of
//! worker threads.

use rayon::prelude::*;

pub const CHUNK: usize = 1024;

pub fn chunked_sum(values: &[f64]) -> f64 {
    chunked_map_sum(values.len(), |i| values[i])
}

/// `Σ_i f(i)` for `i < n`, reduced in fixed chunks.
pub fn chunked_map_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(n);
            (c * CHUNK..end).map(&f).sum::<f64>()
        })
        .collect();
    partials.iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    chunked_map_sum(a.len(), |i| a[i] * b[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_of_thread_count() {
        let v: Vec<f64> = (0..10_007)
            .map(|i| ((i * 7919) % 1013) as f64 * 1e-3 - 0.3)
            .collect();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| chunked_sum(&v));
        let b = four.install(|| chunked_sum(&v));
        assert_eq!(a.to_bits(), b.to_bits());
        let naive: f64 = v.iter().sum();
        assert!((a - naive).abs() < 1e-9);
    }

    #[test]
    fn empty_sum_is_zero() {
        assert_eq!(chunked_sum(&[]), 0.0);
    }
}
