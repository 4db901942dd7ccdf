//! Counter-based seed derivation. Every source of randomness in the crate
//! draws its seed as `derive_seed(master, TAG, index)`, so any replicate or
//! subsample is reproducible in isolation and results are independent of
//! the parallel schedule.

/// Stream tags. Distinct tags keep independent uses of the same master
/// seed from colliding.
pub const TAG_REPLICATION: u64 = 1;
pub const TAG_SUBSAMPLE: u64 = 2;
pub const TAG_WILCOXON_CI: u64 = 3;
pub const TAG_BAND_TREATED: u64 = 4;
pub const TAG_BAND_CONTROL: u64 = 5;
pub const TAG_DOMINANCE: u64 = 6;
pub const TAG_GENERATOR: u64 = 7;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from (master, tag, index).
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    mix(mix(mix(master) ^ tag) ^ index)
}
