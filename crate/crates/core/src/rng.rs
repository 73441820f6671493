//! Seed fan-out.
//!
//! Every random draw in the toolkit comes from a ChaCha8 stream addressed by
//! `(seed, domain, index)`. The seed and domain tag are mixed into the key,
//! the index selects the ChaCha stream, so stream `k` never depends on how many
//! other streams were consumed. Scenario runners derive per-challenge and
//! per-perturbation seeds with [`derive_seed`], which means adding grid points
//! or challenges never reshuffles the existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags. Values are part of the on-disk reproducibility contract.
pub mod domain {
    pub const RSA: u64 = 0x01;
    pub const LS_INIT: u64 = 0x02;
    pub const JITTER: u64 = 0x10;
    pub const REMOVE: u64 = 0x11;
    pub const READD: u64 = 0x12;
    pub const CHALLENGE: u64 = 0x20;
    pub const FLIP: u64 = 0x21;
    pub const NOISE: u64 = 0x22;
    pub const ENROLL: u64 = 0x30;
    pub const AUTH: u64 = 0x31;
    pub const SCENARIO_MASK: u64 = 0x40;
    pub const SCENARIO_CHALLENGE: u64 = 0x41;
    pub const SCENARIO_PERTURB: u64 = 0x42;
    pub const SUBSAMPLE: u64 = 0x50;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `(seed, domain, index)`.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ domain.rotate_left(32)) ^ index)
}

/// Opens the random stream addressed by `(seed, domain, index)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed) ^ splitmix64(domain));
    rng.set_stream(index);
    rng
}
