//! Seed derivation.
//!
//! Every random stream is keyed by the master seed, a component name, and a
//! list of integer indices (epoch, update, game, ...). The derivation is
//! FNV-1a over the component name, folded together with the master seed and
//! each index through SplitMix64 finalisers. Streams keyed differently are
//! statistically independent, and no stream depends on the order in which
//! workers happen to run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, component: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(fnv1a(component)));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i));
    }
    h
}

pub fn rng_for(master: u64, component: &str, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, component, indices))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
