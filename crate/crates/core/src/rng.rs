//! Counter-based random streams.
//!
//! Every random decision is drawn from a ChaCha8 stream addressed by
//! `(seed, domain, indices)`. The key comes from the seed and the 64-bit
//! stream nonce from hashing the domain tag and indices, so the draws for a
//! given row or feature never depend on which thread ran first or how many
//! rows came before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct domains never share a nonce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    MaskingOrder = 1,
    GenerateOrder = 2,
    GenerateDraw = 3,
    ImputeOrder = 4,
    ImputeDraw = 5,
    TwoMoons = 6,
    Mcar = 7,
    Bench = 8,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(acc: u64, word: u64) -> u64 {
    let mut s = acc ^ word.rotate_left(29);
    splitmix64(&mut s)
}

/// Independent random stream for `(seed, domain, indices)`.
pub fn stream(seed: u64, domain: Domain, indices: &[u64]) -> ChaCha8Rng {
    let mut key_state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut key_state).to_le_bytes());
    }
    let mut nonce = mix(0x5555_AAAA_0F0F_F0F0, domain as u64);
    nonce = mix(nonce, indices.len() as u64);
    for &ix in indices {
        nonce = mix(nonce, ix);
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(nonce);
    rng
}

/// Fisher-Yates shuffle, drawing from `rng`.
pub fn shuffle<T, R: rand::Rng + ?Sized>(rng: &mut R, items: &mut [T]) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Uniform random permutation of `0..n`.
pub fn permutation<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(rng, &mut order);
    order
}
