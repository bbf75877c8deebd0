//! Seed derivation. Every random draw in the crate flows through a ChaCha
//! stream seeded by a value produced here, so runs are reproducible and
//! distinct roles never share a stream.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output mix; a cheap, well-dispersed 64-bit finalizer.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream index and a role tag.
pub(crate) fn mix(base: u64, stream: u64, role: u64) -> u64 {
    let a = splitmix64(base);
    let b = splitmix64(a ^ stream.wrapping_mul(GOLDEN));
    splitmix64(b ^ role)
}
