//! Seed plumbing: every random consumer draws from a named sub-stream of a
//! single root seed, so turning one consumer on or off never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic 64-bit seed for `(root, name)`.
pub fn derive_seed(root: u64, name: &str) -> u64 {
    let mut h = splitmix64(root);
    for b in name.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    h
}

pub fn stream(root: u64, name: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(root, name))
}
