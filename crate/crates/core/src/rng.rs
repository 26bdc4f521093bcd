//! Seeded randomness.
//!
//! Every random object is drawn from a `ChaCha8Rng` whose seed is derived
//! from a master seed and a path of integer tags:
//!
//! ```text
//! seed(master, [t1, t2, ..]) = mix(.. mix(mix(master, t1), t2) ..)
//! mix(h, t)                  = splitmix64(h ^ splitmix64(t + 0x9E37_79B9_7F4A_7C15))
//! ```
//!
//! A network uses `[LAYER, l]` for layer `l` and `[READOUT]` for the readout;
//! a layer uses `[OFFSETS]` for its offsets and `[WEIGHTS, i]` for the weight
//! matrix of offset `i`. Experiments use `[TRIAL, k]` for trial `k`. Streams
//! are therefore replayable one at a time and independent of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Generator = ChaCha8Rng;

pub mod tag {
    pub const LAYER: u64 = 1;
    pub const READOUT: u64 = 2;
    pub const OFFSETS: u64 = 3;
    pub const WEIGHTS: u64 = 4;
    pub const TRIAL: u64 = 5;
    pub const INPUT: u64 = 6;
    pub const PROBES: u64 = 7;
    pub const BALL: u64 = 8;
    pub const NETWORK: u64 = 9;
    pub const DIRECTION: u64 = 10;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `master` along `path`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |h, &t| {
        splitmix64(h ^ splitmix64(t.wrapping_add(GOLDEN)))
    })
}

pub fn generator(seed: u64) -> Generator {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of trial `k` under a master seed. Everything a trial draws (network,
/// input, probes) derives from this value, so trials are independent of the
/// order in which they run.
pub fn trial_seed(master: u64, k: u64) -> u64 {
    derive_seed(master, &[tag::TRIAL, k])
}

pub fn derived_generator(master: u64, path: &[u64]) -> Generator {
    generator(derive_seed(master, path))
}
