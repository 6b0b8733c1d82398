//! Deterministic derivation of independent random streams.
//!
//! Every stochastic piece of the system (detector noise, start jitter,
//! weight init, segment sampling) draws from its own stream derived from one
//! master seed and a string tag. Byte-level reproducibility of the protocol
//! outputs depends on this mixing staying stable, so it is spelled out here
//! rather than borrowed from a hasher whose parameters might drift.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream cipher RNG used throughout; fast and platform-independent.
pub type SeedStream = ChaCha8Rng;

/// FNV-1a over the tag, folded into the master seed, finished with a
/// splitmix64 round so near-identical tags land far apart.
pub fn derive(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(master ^ h)
}

/// RNG for the stream named by `tag` under `master`.
pub fn stream(master: u64, tag: &str) -> SeedStream {
    ChaCha8Rng::seed_from_u64(derive(master, tag))
}

fn splitmix(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
