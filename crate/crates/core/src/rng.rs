//! Seed derivation so that independent random streams (shuffling, model
//! init, partition sampling, ...) never alias each other.

/// Derive a child seed from a base seed and a purpose tag.
///
/// FNV-1a over the tag folded with the base, then a splitmix64 finalizer.
/// Stable across runs and platforms by construction.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base.wrapping_mul(0x1000_0000_01b3);
    for &b in tag.as_bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x1000_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
