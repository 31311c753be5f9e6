//! Stable 64-bit seed derivation.
//!
//! Seeds are derived with splitmix64 and FNV-1a so that they are identical
//! across platforms, Rust versions and thread schedules.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Combines a seed with one more input word.
pub fn mix(seed: u64, value: u64) -> u64 {
    splitmix64(seed ^ splitmix64(value))
}

/// Seed for one keyed draw: `mix(mix(master, fnv1a(uid)), index)`.
pub fn keyed_seed(master: u64, uid: &str, index: u64) -> u64 {
    mix(mix(master, fnv1a64(uid.as_bytes())), index)
}
