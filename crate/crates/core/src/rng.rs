//! Deterministic per-trial random streams.
//!
//! Every random draw in a campaign comes from a ChaCha stream keyed by the
//! master seed and a small tuple of identifiers, so results do not depend on
//! how trials are scheduled across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamPurpose {
    Placement,
    SimChannel,
    DpaApertureChannel,
    DpaRfChannel,
    PhaseInit,
    MatchedFilterUser,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Placement => 1,
            StreamPurpose::SimChannel => 2,
            StreamPurpose::DpaApertureChannel => 3,
            StreamPurpose::DpaRfChannel => 4,
            StreamPurpose::PhaseInit => 5,
            StreamPurpose::MatchedFilterUser => 6,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes the identifiers into a single 64-bit stream key.
pub fn stream_key(master_seed: u64, purpose: StreamPurpose, placement: u64, realization: u64) -> u64 {
    let mut h = splitmix64(master_seed);
    for v in [purpose.tag(), placement, realization] {
        h = splitmix64(h ^ v);
    }
    h
}

pub fn stream(master_seed: u64, purpose: StreamPurpose, placement: u64, realization: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_key(master_seed, purpose, placement, realization))
}
