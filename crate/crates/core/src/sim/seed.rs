//! Counter-based random substreams.
//!
//! Every sweep coordinate gets a ChaCha key derived from the master seed and
//! the coordinate's values; every (trial, hypothesis) pair gets its own
//! stream under that key. Nothing depends on which worker runs a trial.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for one coordinate, given as a list of 64-bit words.
pub(crate) fn coordinate_key(seed: u64, words: &[u64]) -> [u8; 32] {
    let mut state = seed;
    let mut h = splitmix64(&mut state);
    for &w in words {
        state ^= w.wrapping_add(h);
        h = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

pub(crate) fn stream(key: &[u8; 32], index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(index);
    rng
}
