//! Deterministic random streams.
//!
//! Every resampling iteration draws from its own ChaCha stream keyed by the
//! master seed, a domain tag and the iteration index, so results do not
//! depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_BOOTSTRAP: u64 = 1;
pub const DOMAIN_PERMUTATION: u64 = 2;
pub const DOMAIN_TREES: u64 = 3;
pub const DOMAIN_SYNTH: u64 = 4;

pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) ^ index);
    rng
}
