//! Counter-based random streams.
//!
//! A single 64-bit master seed is expanded into a ChaCha8 key. Every unit of
//! work (a rejection attempt, a Gibbs chain, a replicate) addresses its own
//! stream by a short path of integers, so results never depend on how the
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep paths from different subsystems disjoint.
pub mod domain {
    pub const SATURATED: u64 = 0x5341_5400;
    pub const STRATUM: u64 = 0x5354_5200;
    pub const QZ: u64 = 0x515a_0000;
    pub const PRIOR_AR: u64 = 0x5052_4152;
    pub const MAR: u64 = 0x4d41_5200;
    pub const GIBBS: u64 = 0x4749_4242;
    pub const DGP: u64 = 0x4447_5000;
    pub const REPLICATE: u64 = 0x5245_504c;
    pub const MODEL: u64 = 0x4d4f_444c;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a path of integers into one 64-bit word.
pub fn hash_path(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    let mut acc = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xff51_afd7_ed55_8ccd);
        acc ^= splitmix64(&mut state);
        acc = acc.rotate_left(23).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    }
    acc ^ splitmix64(&mut state)
}

/// Root of a tree of independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Streams {
    master: u64,
    key: [u8; 32],
}

impl Streams {
    pub fn new(master: u64) -> Self {
        let mut state = master;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Self { master, key }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// A child tree whose streams are disjoint from the parent's.
    pub fn child(&self, path: &[u64]) -> Streams {
        Streams::new(hash_path(self.master, path))
    }

    /// The generator addressed by `path`.
    pub fn rng(&self, path: &[u64]) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(hash_path(self.master, path));
        rng
    }
}
