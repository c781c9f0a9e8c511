//! Keyed random streams.
//!
//! A stream is addressed by `(seed, replicate, purpose, cell)`. The first
//! three form the ChaCha key and the cell index selects the ChaCha stream, so
//! every cell of every replicate draws from its own generator no matter which
//! worker thread evaluates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; distinct purposes never share random numbers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Counts = 1,
    Resample = 2,
    Sampler = 3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replicate: u64,
    pub purpose: Purpose,
}

impl StreamKey {
    pub fn new(seed: u64, replicate: u64, purpose: Purpose) -> Self {
        Self {
            seed,
            replicate,
            purpose,
        }
    }

    pub fn with_purpose(self, purpose: Purpose) -> Self {
        Self { purpose, ..self }
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replicate.to_le_bytes());
        key[16..24].copy_from_slice(&(self.purpose as u64).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        rng
    }

    /// Generator for the zero-based cell `(j, k)` of an `n x m` grid.
    pub fn cell_rng(&self, j: usize, k: usize, m: usize) -> ChaCha8Rng {
        self.rng((j * m + k) as u64)
    }
}
