//! Counter-based randomness.
//!
//! Treatment assignments are keyed by (seed, iteration, pair index) so that
//! draw `m` of `M` is reproducible no matter which iterations ran before it
//! or on which thread.

/// splitmix64 finalizer; full-period bijection on u64.
#[inline]
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derive a sub-seed from a seed and a counter.
#[inline]
pub fn derive(seed: u64, counter: u64) -> u64 {
    mix(seed ^ mix(counter))
}

/// Fair sign draw keyed by (seed, index): +1 or -1.
#[inline]
pub fn sign(seed: u64, index: u64) -> i8 {
    if derive(seed, index) & 1 == 0 {
        1
    } else {
        -1
    }
}

/// Uniform f64 in [0, 1) keyed by (seed, index).
#[inline]
pub fn uniform(seed: u64, index: u64) -> f64 {
    (derive(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
