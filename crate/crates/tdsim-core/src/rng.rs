//! Seeded, named random streams.
//!
//! All randomness in the crate flows from a single 64-bit run seed through
//! named stream splitting: a stream is identified by its path of labels from
//! the root, and two streams with different paths are statistically
//! independent. Splitting hashes (seed, path) into a ChaCha key, so stream
//! layout is stable across platforms and releases of the rand crate family.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// A point in the stream tree from which RNGs and child streams derive.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    path: String,
}

impl RngStream {
    /// Root stream of a run.
    pub fn root(seed: u64) -> Self {
        Self {
            seed,
            path: String::new(),
        }
    }

    /// Derive an independent child stream.
    pub fn child(&self, label: &str) -> Self {
        let mut path = self.path.clone();
        path.push('/');
        path.push_str(label);
        Self {
            seed: self.seed,
            path,
        }
    }

    /// Child stream with a numeric suffix, for loop bodies.
    pub fn child_indexed(&self, label: &str, index: usize) -> Self {
        self.child(&format!("{label}{index}"))
    }

    /// Instantiate the generator for this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.path.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        ChaCha12Rng::from_seed(key)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}
