//! Deterministic fan-out over grids and Monte Carlo batches.
//!
//! With the `parallel` feature (on by default) the helpers run on the rayon
//! pool; without it they fall back to plain iteration. Results are collected
//! in input order and every batch element derives its own seed from the
//! batch seed and its index, so outputs never depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Derives an independent per-element seed from a batch seed and an index
/// (splitmix64 finalizer over a Weyl increment).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps `f` over a slice, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// Maps `f` over a slice, in parallel when enabled.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Maps `f` over `0..count`, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn par_map_indexed<R: Send>(count: u64, f: impl Fn(u64) -> R + Sync + Send) -> Vec<R> {
    (0..count).into_par_iter().map(f).collect()
}

/// Maps `f` over `0..count`, in parallel when enabled.
#[cfg(not(feature = "parallel"))]
pub fn par_map_indexed<R>(count: u64, f: impl Fn(u64) -> R) -> Vec<R> {
    (0..count).map(f).collect()
}
