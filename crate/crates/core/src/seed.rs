//! Seed derivation so per-item random streams do not depend on the order
//! in which items are processed.

/// One step of the SplitMix64 output function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// 64-bit FNV-1a hash.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xCBF2_9CE4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Stream seed for a named item under a base seed.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    splitmix64(base ^ fnv1a(key.as_bytes()))
}

/// Stream seed for an indexed item under a base seed.
pub fn derive_indexed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index)
}
