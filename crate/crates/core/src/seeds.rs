//! Named seed streams.
//!
//! A stream is identified by a master seed and a path of names; each path maps
//! to an independent 64-bit seed, so adding a consumer never shifts the seeds
//! of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a, fixed across platforms and releases.
fn hash_name(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self {
            seed: splitmix(master),
        }
    }

    pub fn child(&self, name: &str) -> Self {
        Self {
            seed: splitmix(self.seed ^ hash_name(name)),
        }
    }

    pub fn index(&self, i: u64) -> Self {
        Self {
            seed: splitmix(self.seed.wrapping_add(splitmix(i ^ 0x5851_f42d_4c95_7f2d))),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Seed for item `i` of a family rooted at `seed`.
pub fn derive(seed: u64, i: u64) -> u64 {
    SeedStream::new(seed).index(i).seed()
}
