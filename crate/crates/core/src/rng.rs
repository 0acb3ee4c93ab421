//! Per-task random streams derived from a master seed.
//!
//! Stream keys are hashed with SplitMix64 into a ChaCha8 seed, so the stream
//! for `(master, path...)` does not depend on which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for the task addressed by `path` under `master`.
pub fn derive_rng(master: u64, path: &[u64]) -> SampleRng {
    let mut state = master;
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xd6e8_feb8_6659_fd93) ^ acc;
        acc = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Generator for independent sample `index`.
pub fn plan_rng(master: u64, index: u64) -> SampleRng {
    derive_rng(master, &[0, index])
}

/// Generator for step `step` of chain `chain`.
pub fn chain_rng(master: u64, chain: u64, step: u64) -> SampleRng {
    derive_rng(master, &[1, chain, step])
}
