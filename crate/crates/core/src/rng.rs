//! Seed derivation. Every stochastic component draws from a stream keyed by
//! `(master seed, component name, iteration index)`, so one component's
//! draws never shift another's and iterations can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, component: &str, iteration: u64) -> u64 {
    let a = splitmix64(master ^ fnv1a(component.as_bytes()));
    splitmix64(a ^ splitmix64(iteration))
}

pub fn stream(master: u64, component: &str, iteration: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, component, iteration))
}
