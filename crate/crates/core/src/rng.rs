//! Seed derivation. Every random stream (map generation, initial placement,
//! mobility, fading, policy sampling, minibatch shuffling) gets its own
//! generator derived from the master seed, so changing how one stream is
//! consumed never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Map = 1,
    Placement = 2,
    Mobility = 3,
    Fading = 4,
    Policy = 5,
    Shuffle = 6,
    Init = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `stream`, instance `index` (episode number, worker id, ...).
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master ^ 0x5EED_0000_0000_0000);
    let b = splitmix64(a ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    splitmix64(b ^ index.wrapping_mul(0x9FB2_1C65_1E98_DF25))
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, stream, index))
}
