//! Deterministic seed derivation.
//!
//! Every run owns a single `u64` seed; all RNG streams (initialization,
//! per-iteration sampling, noise, datasets) are derived from it so that runs
//! differing only in seed share no RNG state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named RNG streams derived from a run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    ControllerInit,
    RndTargetInit,
    RndPredictorInit,
    SchemeSampling,
    ReplaySampling,
    EnvNoise,
    Dataset,
    SupernetInit,
    Pretrain,
    Scratch,
    Baseline,
    Bench,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::ControllerInit => 1,
            Stream::RndTargetInit => 2,
            Stream::RndPredictorInit => 3,
            Stream::SchemeSampling => 4,
            Stream::ReplaySampling => 5,
            Stream::EnvNoise => 6,
            Stream::Dataset => 7,
            Stream::SupernetInit => 8,
            Stream::Pretrain => 9,
            Stream::Scratch => 10,
            Stream::Baseline => 11,
            Stream::Bench => 12,
        }
    }
}

/// SplitMix64 finalizer; decorrelates nearby seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive the sub-seed for `stream` from a run seed.
pub fn derive(seed: u64, stream: Stream) -> u64 {
    splitmix64(seed ^ splitmix64(stream.tag()))
}

/// Derive a per-step sub-seed, e.g. one sampling stream per search iteration.
pub fn derive_step(seed: u64, stream: Stream, step: u64) -> u64 {
    splitmix64(derive(seed, stream) ^ splitmix64(step.wrapping_add(0x5151_5151)))
}

/// Seeded RNG for `stream`.
pub fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream))
}

/// Seeded RNG for `stream` at a given step.
pub fn rng_step(seed: u64, stream: Stream, step: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_step(seed, stream, step))
}
