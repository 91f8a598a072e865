//! Seeded pseudo-random generation.
//!
//! All stochastic stages draw from xoshiro256++ seeded through SplitMix64
//! (`seed_from_u64`). Uniform doubles take the top 53 bits of each 64-bit
//! output and normals use the Box-Muller transform, so a generator state
//! always yields the same stream on every platform.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// The generator used throughout the crate.
pub type Generator = Xoshiro256PlusPlus;

pub fn seeded(seed: u64) -> Generator {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// One SplitMix64 finalization step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for a named stage. Stages with different names get
/// independent streams from the same parent seed.
pub fn derive_seed(parent: u64, stage: &str) -> u64 {
    // FNV-1a over the stage name
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(parent ^ h)
}

/// Child seed for an indexed item (trial, restart, ...).
pub fn derive_indexed(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index.wrapping_add(1)))
}

/// Uniform double in [0, 1).
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in [lo, hi] (inclusive) by rejection on the top bits.
pub fn uniform_int(rng: &mut impl RngCore, lo: usize, hi: usize) -> usize {
    debug_assert!(lo <= hi);
    let span = (hi - lo) as u64 + 1;
    if span == 0 {
        return lo + rng.next_u64() as usize;
    }
    let zone = u64::MAX - (u64::MAX % span);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return lo + (v % span) as usize;
        }
    }
}

/// Standard normal deviate (Box-Muller, one value per call).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    // 1 - u keeps the log argument in (0, 1]
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fisher-Yates shuffle driven by [`uniform_int`].
pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = uniform_int(rng, 0, i);
        items.swap(i, j);
    }
}
