#![allow(dead_code)]

pub mod formats;
pub mod grad;
pub mod metrics;
pub mod simulator;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
