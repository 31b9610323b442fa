//! Deterministic random stream derivation.
//!
//! Every stochastic draw in the simulator comes from a stream keyed by
//! `(seed, tag, a, b)` — e.g. `(seed, MOTION, particle_id, step_index)` —
//! so results never depend on thread count or scheduling order. Stream keys
//! are expanded to a full 256-bit generator state with a splitmix chain.

use rand::rngs::SmallRng;
use rand::SeedableRng;

/// Per-particle, per-step displacement sampling.
pub const TAG_MOTION: u64 = 0x4d4f54494f4e;
/// Assimilation acceptance draws on wall contact.
pub const TAG_CAPTURE: u64 = 0x43415054;
/// Initial population placement.
pub const TAG_PLACEMENT: u64 = 0x504c414345;
/// Carrier release positions on the transmitter surface.
pub const TAG_RELEASE: u64 = 0x52454c45415345;
/// Capture draws for carrier contacts with receptor-bearing mobile cells.
pub const TAG_MOBILE_CAPTURE: u64 = 0x4d4f42494c45;
/// Replicate seed derivation.
pub const TAG_REPLICATE: u64 = 0x5245504c4943;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the generator for stream `(seed, tag, a, b)`.
#[inline]
pub fn stream(seed: u64, tag: u64, a: u64, b: u64) -> SmallRng {
    let mut s = seed;
    for v in [tag, a, b] {
        s = splitmix64(&mut s) ^ v.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    }
    let mut seed_bytes = [0u8; 32];
    for chunk in seed_bytes.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    SmallRng::from_seed(seed_bytes)
}

/// Seed for replicate `k` of a batch run; replicate 0 is the base seed run.
pub fn replicate_seed(seed: u64, replicate: u64) -> u64 {
    if replicate == 0 {
        return seed;
    }
    let mut s = seed ^ TAG_REPLICATE.rotate_left(17) ^ replicate.wrapping_mul(0xda94_2042_e4dd_58b5);
    splitmix64(&mut s)
}
