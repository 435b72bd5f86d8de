//! Per-case seed derivation.
//!
//! `split_seed(master, i) = mix(master + (i + 1)·γ)` with the SplitMix64
//! increment `γ = 0x9E3779B97F4A7C15` and finalizer. Because `γ` is odd the
//! pre-mix state is distinct for every `i` modulo 2⁶⁴, and the finalizer is a
//! bijection, so case seeds never collide for a fixed master seed.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Stream tag xor-ed into the master seed for per-patient threshold draws.
pub const THRESHOLD_STREAM: u64 = 0x7468_7265_7368_6f6c;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for case `index` under `master`.
#[inline]
pub fn split_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Seed of patient `m`'s threshold list.
pub fn threshold_seed(master: u64, patient: u64) -> u64 {
    split_seed(master ^ THRESHOLD_STREAM, patient)
}
