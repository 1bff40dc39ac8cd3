//! Deterministic RNG streams derived from a single master seed.
//!
//! Every source of randomness in the crate takes a stream derived from
//! `(master seed, purpose string, index)`. Worker threads get disjoint
//! indices, so results do not depend on the thread count.

use rand_pcg::Pcg64;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derives an independent stream for `(master, purpose, index)`.
pub fn derive_rng(master: u64, purpose: &str, index: u64) -> Pcg64 {
    let mut state = master ^ fnv1a(purpose.as_bytes());
    let a = splitmix64(&mut state);
    state ^= index;
    let b = splitmix64(&mut state);
    let c = splitmix64(&mut state);
    let d = splitmix64(&mut state);
    // Pcg64 state is 128-bit state + 128-bit stream.
    let seed = u128::from(a) << 64 | u128::from(b);
    let stream = u128::from(c) << 64 | u128::from(d);
    Pcg64::new(seed, stream)
}
