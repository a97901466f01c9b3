//! Seed derivation for independent random streams.
//!
//! A run has one master seed. Each consumer (data, init, label noise, test set)
//! draws from its own ChaCha8 stream whose seed is derived from the master seed
//! and a fixed stream id with the SplitMix64 finalizer, so changing how much one
//! stream is consumed never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of the SplitMix64 generator applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and an index path.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(parent), |acc, &k| splitmix64(acc ^ splitmix64(k.wrapping_add(GOLDEN_GAMMA))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Data,
    Init,
    LabelNoise,
    Test,
}

impl Stream {
    pub const ALL: [Stream; 4] = [Stream::Data, Stream::Init, Stream::LabelNoise, Stream::Test];

    pub fn id(self) -> u64 {
        match self {
            Stream::Data => 1,
            Stream::Init => 2,
            Stream::LabelNoise => 3,
            Stream::Test => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::Data => "data",
            Stream::Init => "init",
            Stream::LabelNoise => "label_noise",
            Stream::Test => "test",
        }
    }
}

/// Derived seed of a named stream.
pub fn stream_seed(master: u64, stream: Stream) -> u64 {
    derive_seed(master, &[stream.id()])
}

pub fn stream_rng(master: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(master, stream))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub stream: Stream,
    pub id: u64,
    pub seed: u64,
}

/// The derivation table written into run manifests.
pub fn stream_table(master: u64) -> Vec<StreamRecord> {
    Stream::ALL
        .iter()
        .map(|&s| StreamRecord { stream: s, id: s.id(), seed: stream_seed(master, s) })
        .collect()
}
