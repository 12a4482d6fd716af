//! Seeded generators and counter-based seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Generator used everywhere in the crate.
pub type DpRng = ChaCha20Rng;

pub fn rng_from_seed(seed: u64) -> DpRng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for `(master, path[0], path[1], ...)`.
///
/// The result depends only on the inputs, never on the order in which
/// children are created, so trials can run in any order or in parallel.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &i| splitmix64(acc ^ splitmix64(i.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn derive_rng(master: u64, path: &[u64]) -> DpRng {
    rng_from_seed(derive_seed(master, path))
}
