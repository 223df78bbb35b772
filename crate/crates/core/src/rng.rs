//! Seeded, injectable randomness.
//!
//! Every stochastic operation in the crate takes a `&mut RandomSource`; nothing
//! reads a global generator. ChaCha8 gives identical streams on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed for run `index` of a batch driven by `master`.
    ///
    /// Each index reads from its own ChaCha stream, so neighbouring runs do not
    /// share prefixes.
    pub fn derive_seed(master: u64, index: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(master);
        rng.set_stream(index);
        rng.next_u64()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn next_bit(&mut self) -> u8 {
        u8::from(self.next_f64() >= 0.5)
    }

    /// Bernoulli trial with success probability `p`.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }
}
